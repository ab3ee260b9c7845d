"""Nearest-neighbor and distance-to-measure anomaly detection toolkit."""

from .data import (
    ANOMALY,
    NORMAL,
    ContaminationSpec,
    CsvFormatError,
    Dataset,
    LabeledDataset,
    generate_scenario,
    load_csv,
    make_rng,
    sample_contaminated,
    save_csv,
)
from .detectors import (
    DetectorConfig,
    ScoreReport,
    dtm_score,
    dtm_scores,
    dtmf2_raw,
    dtmf2_scores,
    lof_scores,
    rank_anomalies,
    score_dataset,
)
from .evaluation import (
    BoundaryReport,
    EvalResult,
    WilcoxonResult,
    average_precision,
    boundary_misclassification,
    evaluate_scores,
    roc_auc,
    wilcoxon_signed_rank,
)
from .nnindex import NeighborIndex, NeighborList, build_index, knn_query, knn_radius
from .theory import (
    HuberMixture,
    PointMass,
    ReferenceDistribution,
    SeparationReport,
    TheoryInputs,
    UniformBall,
    UniformInterval,
    check_separation,
    compute_report,
    dtm_deviation_bound,
    dtm_deviation_bound_sample,
    fit_regularity_constant,
    full_support_separation,
    global_deviation_rate,
    population_dtm,
    population_radius,
    radius_deviation_bound,
    radius_deviation_bound_sample,
    safety_density_threshold,
    sample_deviation_rate,
    support_gap,
)

__version__ = "0.1.0"
