"""miaudit: membership-inference audits of generative models.

Scores candidate records against generator samples or reconstructions and
decides single-record and set membership with quantified accuracy.
"""

__version__ = "0.1.0"

from .core_data import (
    ReconstructionBatch,
    RecordSet,
    SampleMatrix,
    ScoreVector,
    TrialReport,
    Origin,
    read_matrix,
    read_scores,
    write_matrix,
    write_scores,
)
from .distances import DistanceSpec, neighborhood_stats, pairwise_min_distances
from .features import (
    ChistParams,
    HogParams,
    PcaModel,
    chist_features,
    hog_features,
    pca_fit,
    pca_transform,
)
from .attacks import (
    EpsilonHeuristic,
    KdeConfig,
    McConfig,
    epsilon_median,
    epsilon_percentile,
    kde_score,
    mc_distance_score,
    mc_epsilon_score,
    reconstruction_score,
    run_mc_attack,
    run_reconstruction_attack,
)
from .scenarios import (
    AggregateReport,
    ScenarioConfig,
    TrialData,
    anova_f,
    anova_p,
    run_trials,
    set_mi,
    set_mi_median_rule,
    single_mi,
)
from .synth import (
    BiasedReconstructor,
    GaussianMixture,
    MemorizingGenerator,
    default_population,
    generate,
    reconstruct,
)

__all__ = [name for name in dir() if not name.startswith("_")]
