"""Feature-space image anomaly detection with negated PCA.

Fit a multivariate Gaussian to normal training features, whiten into the
ascending-eigenvalue basis, score images in the k lowest-variance
directions, and choose k either by exhaustive AUROC sweep or by one of
three label-free heuristics.
"""

from .errors import (
    AdnpcaError,
    DegenerateInput,
    DegenerateSpectrum,
    DimensionMismatch,
    EmptyClass,
    InvalidSpec,
    IoFailure,
    KOutOfRange,
    MalformedFile,
    NonFiniteEntry,
    NumericalFailure,
    PairingMismatch,
    TooFewSamples,
    UnknownStage,
    ZeroNormalScore,
)
from .evaluation import (
    RegretEntry,
    RocResult,
    SweepResult,
    auroc,
    regret,
    roc_curve,
    sweep_k,
)
from .featstore import (
    STAGE_CHANNELS,
    DatasetManifest,
    FeatureMatrix,
    ManifestEntry,
    load_manifest,
    read_feature_matrix,
    save_manifest,
    validate_stage_dims,
    write_feature_matrix,
)
from .gaussian import (
    GaussianModel,
    RankDeficiencyWarning,
    SpectralModel,
    WhitenedMatrix,
    fit_gaussian,
    gaussian_logpdf,
    load_model,
    mahalanobis,
    save_model,
    spectral_decompose,
    whiten,
)
from .heuristics import (
    HeuristicCurve,
    Selection,
    differential_curve,
    eigenvalue_ratio_curve,
    ks_pvalue,
    normality_curve,
    relative_distance_curve,
    select_k_argmax,
    select_k_tolerance,
)
from .npca import NpcaScores, npca_project, npca_score
from .synthgen import Benchmark, BenchmarkSpec, generate_benchmark, write_benchmark

__version__ = "0.1.0"

__all__ = [
    "AdnpcaError",
    "Benchmark",
    "BenchmarkSpec",
    "DatasetManifest",
    "DegenerateInput",
    "DegenerateSpectrum",
    "DimensionMismatch",
    "EmptyClass",
    "FeatureMatrix",
    "GaussianModel",
    "HeuristicCurve",
    "InvalidSpec",
    "IoFailure",
    "KOutOfRange",
    "MalformedFile",
    "ManifestEntry",
    "NonFiniteEntry",
    "NpcaScores",
    "NumericalFailure",
    "PairingMismatch",
    "RankDeficiencyWarning",
    "RegretEntry",
    "RocResult",
    "STAGE_CHANNELS",
    "Selection",
    "SpectralModel",
    "SweepResult",
    "TooFewSamples",
    "UnknownStage",
    "WhitenedMatrix",
    "ZeroNormalScore",
    "auroc",
    "differential_curve",
    "eigenvalue_ratio_curve",
    "fit_gaussian",
    "gaussian_logpdf",
    "generate_benchmark",
    "ks_pvalue",
    "load_manifest",
    "load_model",
    "mahalanobis",
    "normality_curve",
    "npca_project",
    "npca_score",
    "read_feature_matrix",
    "regret",
    "relative_distance_curve",
    "roc_curve",
    "save_manifest",
    "save_model",
    "select_k_argmax",
    "select_k_tolerance",
    "spectral_decompose",
    "sweep_k",
    "validate_stage_dims",
    "whiten",
    "write_benchmark",
    "write_feature_matrix",
]
