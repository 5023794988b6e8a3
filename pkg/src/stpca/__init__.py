"""Spatial-temporal PCA.

Reduces an n x m multivariate time series to a single latent series via a
delay-consistent projection, and builds on that latent series for
component extraction, sliding-window fluctuation tracking, tipping-point
detection, and discharge decision scoring.
"""

from .analysis import (
    FluctuationSweep,
    ProjectionSet,
    detect_tipping,
    discrete_frechet,
    fluctuation_sweep,
    hankel_svd_projections,
    pca_baseline,
    pcfd,
)
from .core import (
    BlockTridiagOperator,
    EigenPair,
    EmbeddingConfig,
    GramBlocks,
    SeriesMatrix,
    StpcaResult,
    center_series,
    dominant_eigenpair,
    embedding_error,
    fit_stpca,
    gram_blocks,
    h_matvec,
    objective_value,
)
from .decision import (
    DecisionConfig,
    DecisionMetrics,
    DecisionOutcome,
    PatientRecord,
    aggregate_metrics,
    discharge_decision,
    evaluate_patient,
    fluctuation_history,
    idx_z,
    item_flags,
    score_decisions,
)
from .errors import (
    ConvergenceError,
    DataFormatError,
    InvalidDataError,
    ParameterError,
    ShapeError,
    StpcaError,
)
from .hankel import extract_latent, hankel_from_series, is_hankel, nearest_hankel
from .io_csv import (
    RunConfig,
    load_bounds_csv,
    load_curve_csv,
    load_events_csv,
    load_patient_records,
    load_series_csv,
    load_sweep_csv,
    write_curve_csv,
    write_decisions_csv,
    write_metrics_csv,
    write_series_csv,
    write_sweep_csv,
)
from .synth import (
    BifNetConfig,
    LorenzConfig,
    NoiseSpec,
    add_observation_noise,
    fold_branch,
    network_drift,
    simulate_bifurcation_network,
    simulate_coupled_lorenz,
)

__version__ = "0.1.0"
