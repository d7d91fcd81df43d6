"""Run configuration.

A TOML file provides defaults; command-line flags override it.  Every
tunable that the underlying study left unstated (permutation count,
significance level, test sidedness, contiguity rule, priors) lives here
and is echoed into the run report so outputs are self-describing.
"""

from __future__ import annotations

import os
import sys
from dataclasses import dataclass, fields, replace
from datetime import date
from pathlib import Path
from typing import Any, Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError
from .metrics import DEFAULT_WINDOW, METRIC_IDS, TimeWindow

__all__ = ["RunConfig", "load_config", "OUTPUT_ENV_VAR"]

OUTPUT_ENV_VAR = "URBAN_SUBDIVIDE_OUTPUT"

_CHOICES = {
    "contiguity": ("queen", "rook"),
    "variance": ("global", "neighbors"),
    "global_alternative": ("directional", "greater", "less", "two-sided"),
    "local_alternative": ("two-sided", "directional", "greater", "less"),
    "ks_method": ("asymptotic", "exact", "auto"),
}


@dataclass(frozen=True)
class RunConfig:
    grid: Path
    visits: Path
    output_dir: Path
    neighborhoods: Path | None = None
    pois: Path | None = None
    metrics: tuple[str, ...] = METRIC_IDS
    window: TimeWindow = DEFAULT_WINDOW
    contiguity: str = "queen"
    snap_tol: float = 1e-6
    overlap_tol: float = 1e-6
    permutations: int = 999
    alpha: float = 0.05
    seed: int = 0
    global_alternative: str = "directional"
    local_alternative: str = "two-sided"
    variance: str = "global"
    alpha_prior: float = 0.5
    min_covered_fraction: float = 0.05
    ks_method: str = "asymptotic"
    threads: int = 1
    force: bool = False

    def validate(self) -> "RunConfig":
        if self.permutations < 99:
            raise ConfigError(f"permutations must be >= 99, got {self.permutations}")
        if not 0 < self.alpha <= 0.5:
            raise ConfigError(f"alpha must be in (0, 0.5], got {self.alpha}")
        if not self.metrics:
            raise ConfigError("at least one metric is required")
        for mid in self.metrics:
            if mid not in METRIC_IDS:
                raise ConfigError(f"unknown metric '{mid}'; choose from {METRIC_IDS}")
        if len(set(self.metrics)) != len(self.metrics):
            raise ConfigError("metrics must be unique")
        for name, choices in _CHOICES.items():
            if getattr(self, name) not in choices:
                raise ConfigError(f"{name} must be one of {choices}, got '{getattr(self, name)}'")
        if self.snap_tol < 0 or self.overlap_tol < 0:
            raise ConfigError("tolerances must be >= 0")
        if self.alpha_prior <= 0:
            raise ConfigError(f"alpha_prior must be > 0, got {self.alpha_prior}")
        if not 0 <= self.min_covered_fraction <= 1:
            raise ConfigError("min_covered_fraction must be in [0, 1]")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        for label, path in (("grid", self.grid), ("visits", self.visits),
                            ("neighborhoods", self.neighborhoods), ("pois", self.pois)):
            if path is not None and not Path(path).exists():
                raise ConfigError(f"{label} file does not exist: {path}")
        return self

    def echo(self) -> dict[str, Any]:
        """Fully resolved analysis configuration for embedding in the run report.

        Execution knobs (threads, force) are left out: they must not
        change results, so reruns stay byte-identical across them.
        """
        out: dict[str, Any] = {}
        for f in fields(self):
            if f.name in ("threads", "force"):
                continue
            value = getattr(self, f.name)
            if isinstance(value, Path):
                value = str(value)
            elif isinstance(value, TimeWindow):
                value = {
                    "start_hour": value.start_hour,
                    "end_hour": value.end_hour,
                    "days": [d.isoformat() for d in value.days] if value.days else None,
                }
            elif isinstance(value, tuple):
                value = list(value)
            out[f.name] = value
        return out


_TOML_KEYS = {
    "inputs": {"grid", "visits", "neighborhoods", "pois"},
    "analysis": {
        "metrics", "window_start", "window_end", "window_days", "contiguity",
        "snap_tol", "overlap_tol", "permutations", "alpha", "seed",
        "global_alternative", "local_alternative", "variance", "alpha_prior",
        "min_covered_fraction", "ks_method", "threads",
    },
    "output": {"dir", "force"},
}


def _parse_days(raw: Any) -> tuple[date, date]:
    try:
        lo, hi = raw
        return (date.fromisoformat(str(lo)), date.fromisoformat(str(hi)))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"window_days must be two ISO dates, got {raw!r}") from exc


def load_config(config_path: str | os.PathLike | None = None, **overrides: Any) -> RunConfig:
    """Merge defaults, the TOML file (if given) and explicit overrides.

    Relative input paths in the file resolve against the file's directory.
    The output directory falls back to the environment variable
    URBAN_SUBDIVIDE_OUTPUT when neither file nor flags set it.
    """
    settings: dict[str, Any] = {}
    if config_path is not None:
        try:
            with open(config_path, "rb") as fh:
                doc = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{config_path}: invalid TOML: {exc}") from exc
        base = Path(config_path).resolve().parent
        for section, keys in _TOML_KEYS.items():
            body = doc.pop(section, {})
            if not isinstance(body, dict):
                raise ConfigError(f"{config_path}: [{section}] must be a table")
            for key in list(body):
                if key not in keys:
                    raise ConfigError(f"{config_path}: unknown key '{key}' in [{section}]")
            if section == "inputs":
                for key, value in body.items():
                    settings[key] = base / str(value)
            elif section == "output":
                if "dir" in body:
                    settings["output_dir"] = base / str(body["dir"])
                if "force" in body:
                    settings["force"] = bool(body["force"])
            else:
                settings.update(body)
        if doc:
            raise ConfigError(f"{config_path}: unknown section(s) {sorted(doc)}")

    for key, value in overrides.items():
        if value is not None:
            settings[key] = value

    window_kwargs: dict[str, Any] = {}
    if "window_start" in settings:
        window_kwargs["start_hour"] = int(settings.pop("window_start"))
    if "window_end" in settings:
        window_kwargs["end_hour"] = int(settings.pop("window_end"))
    if "window_days" in settings:
        raw = settings.pop("window_days")
        if raw is not None:
            window_kwargs["days"] = _parse_days(raw)
    if window_kwargs:
        defaults = settings.pop("window", DEFAULT_WINDOW)
        settings["window"] = replace(defaults, **window_kwargs)

    if "metrics" in settings:
        raw = settings["metrics"]
        if isinstance(raw, str):
            raw = [m.strip() for m in raw.split(",") if m.strip()]
        settings["metrics"] = tuple(str(m) for m in raw)

    if "output_dir" not in settings:
        env = os.environ.get(OUTPUT_ENV_VAR)
        if env:
            settings["output_dir"] = Path(env)
        else:
            raise ConfigError(
                f"no output directory: set [output] dir, --out, or ${OUTPUT_ENV_VAR}"
            )
    for key in ("grid", "visits", "neighborhoods", "pois", "output_dir"):
        if key in settings and settings[key] is not None:
            settings[key] = Path(settings[key])

    known = {f.name for f in fields(RunConfig)}
    unknown = set(settings) - known
    if unknown:
        raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
    if "grid" not in settings or "visits" not in settings:
        raise ConfigError("configuration needs at least 'grid' and 'visits' inputs")
    try:
        cfg = RunConfig(**settings)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg.validate()
