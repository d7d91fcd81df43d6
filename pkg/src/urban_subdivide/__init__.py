"""Subdivision-level analysis of urban mobility fields.

The package turns a polygon grid plus visit counts into standardized
per-cell metrics, tests them for spatial clustering, labels hot and
cold spots, and characterizes those spots against income, point of
interest composition and diversity.
"""

from .characterize import (
    EntropyField,
    KsTestResult,
    PoiAssociation,
    compare_entropy,
    compare_income,
    compare_poi_association,
    ecdf_points,
    ks_two_sample,
    poi_entropy,
    poi_log_odds,
)
from .config import RunConfig, load_config
from .errors import (
    ConfigError,
    DegeneracyError,
    DegenerateFieldError,
    DuplicateCellIdError,
    EmptySampleError,
    EmptyWindowError,
    GeographicCrsError,
    InputError,
    InvalidPolygonError,
    InvalidSpecError,
    MisalignedPeriodError,
    MissingPropertyError,
    NegativeCountError,
    NoSpotsError,
    OverlappingCellsError,
    PipelineError,
    SubgroupExceedsTotalError,
    TooFewCellsError,
    UnknownCategoryError,
    UnknownCellError,
    UnknownGroupError,
    UrbanSubdivideError,
)
from .geometry import (
    AdjacencyList,
    IncomeField,
    PoiTable,
    assign_pois,
    build_adjacency,
    interpolate_income,
)
from .ingest import (
    CATEGORIES,
    Cell,
    CellGrid,
    Neighborhood,
    PoiRecord,
    VisitRecord,
    load_grid,
    load_neighborhoods,
    load_pois,
    load_visits,
)
from .metrics import (
    METRIC_IDS,
    MetricField,
    TimeWindow,
    compute_metric,
    standardize,
)
from .pipeline import run_pipeline
from .spatial import (
    SPOT_LABELS,
    GlobalMoranResult,
    LocalMoranResult,
    SpotClassification,
    WeightMatrix,
    build_weights,
    classify_spots,
    global_moran,
    local_moran,
)
from .synth import BlockSpec, SynthSpec, brute_force_moran, generate

__version__ = "0.1.0"

__all__ = [
    "AdjacencyList",
    "BlockSpec",
    "CATEGORIES",
    "Cell",
    "CellGrid",
    "ConfigError",
    "DegeneracyError",
    "DegenerateFieldError",
    "DuplicateCellIdError",
    "EmptySampleError",
    "EmptyWindowError",
    "EntropyField",
    "GeographicCrsError",
    "GlobalMoranResult",
    "IncomeField",
    "InputError",
    "InvalidPolygonError",
    "InvalidSpecError",
    "KsTestResult",
    "LocalMoranResult",
    "METRIC_IDS",
    "MetricField",
    "MisalignedPeriodError",
    "MissingPropertyError",
    "NegativeCountError",
    "Neighborhood",
    "NoSpotsError",
    "OverlappingCellsError",
    "PipelineError",
    "PoiAssociation",
    "PoiRecord",
    "PoiTable",
    "RunConfig",
    "SPOT_LABELS",
    "SpotClassification",
    "SubgroupExceedsTotalError",
    "SynthSpec",
    "TimeWindow",
    "TooFewCellsError",
    "UnknownCategoryError",
    "UnknownCellError",
    "UnknownGroupError",
    "UrbanSubdivideError",
    "VisitRecord",
    "WeightMatrix",
    "assign_pois",
    "brute_force_moran",
    "build_adjacency",
    "build_weights",
    "classify_spots",
    "compare_entropy",
    "compare_income",
    "compare_poi_association",
    "compute_metric",
    "ecdf_points",
    "generate",
    "global_moran",
    "interpolate_income",
    "ks_two_sample",
    "load_config",
    "load_grid",
    "load_neighborhoods",
    "load_pois",
    "load_visits",
    "local_moran",
    "poi_entropy",
    "poi_log_odds",
    "run_pipeline",
    "standardize",
]
