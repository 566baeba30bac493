"""Fraud detectors trained by asexual reproduction optimisation, with an AIS baseline."""

__version__ = "0.1.0"

from .dataset import Dataset, GeneratorConfig, Label, class_partition, generate_splits, load_csv, save_csv  # noqa: E402
from .detectors import DetectorSet, load_detectors, save_detectors  # noqa: E402
from .fitness import FeatureBounds, FitnessContext, compute_bounds  # noqa: E402

__all__ = [
    "Dataset",
    "GeneratorConfig",
    "Label",
    "class_partition",
    "generate_splits",
    "load_csv",
    "save_csv",
    "DetectorSet",
    "load_detectors",
    "save_detectors",
    "FeatureBounds",
    "FitnessContext",
    "compute_bounds",
]
