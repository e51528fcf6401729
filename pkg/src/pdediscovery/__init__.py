"""Bayesian discovery of spatio-temporal dynamic equations from gridded data."""

__version__ = "0.1.0"

from .basis import (  # noqa: E402
    DerivSpec,
    OperatorSpec,
    SpatialBasis,
    TemporalBasis,
    evaluate_bases,
    make_bspline,
)
from .diagnostics import equation_summary, hpd_interval, inclusion_probabilities  # noqa: E402
from .library import FeatureLibrary, parse_library, standard_poly_deriv_library  # noqa: E402
from .sampler import ModelConfig, ObservationSet, Problem, run_chain  # noqa: E402

__all__ = [
    "DerivSpec",
    "FeatureLibrary",
    "ModelConfig",
    "ObservationSet",
    "OperatorSpec",
    "Problem",
    "SpatialBasis",
    "TemporalBasis",
    "equation_summary",
    "evaluate_bases",
    "hpd_interval",
    "inclusion_probabilities",
    "make_bspline",
    "parse_library",
    "run_chain",
    "standard_poly_deriv_library",
]
