import numpy as np

from urban_subdivide.streams import derive_seed, stable_hash, substream


def test_substream_reproducible():
    a = substream(42, "a").random(5)
    b = substream(42, "a").random(5)
    assert np.array_equal(a, b)


def test_substream_token_separation():
    a = substream(42, "a").random(5)
    b = substream(42, "b").random(5)
    c = substream(43, "a").random(5)
    assert not np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_substream_mixed_token_types():
    a = substream(7, "cell", 3).random(2)
    b = substream(7, "cell", "3").random(2)
    assert np.array_equal(a, b)


def test_derive_seed_frozen():
    # pinned so run outputs stay comparable across releases
    assert derive_seed(0, "x") == 10591194575447261316


def test_derive_seed_order_sensitive():
    assert derive_seed(1, "a", "b") != derive_seed(1, "b", "a")


def test_stable_hash_range():
    h = stable_hash("moran-global")
    assert 0 <= h < 2**64
    assert h == stable_hash("moran-global")
