"""Label-free scoring and ranking of UDA model checkpoints.

The library scores checkpoint dumps (features + logits per split) with 35
validator variants, ranks validators against oracle target accuracy with a
weighted Spearman correlation, computes top-N run accuracy (AATN), and ships a
synthetic benchmark generator so the whole pipeline is verifiable end to end.
"""

__version__ = "0.1.0"

from .clustering import ClusterAssignment, adjusted_mutual_information, kmeans, silhouette_score
from .discriminator import (
    DiscriminatorModel,
    TrainConfig,
    density_ratio_weights,
    predict_target_prob,
    train_discriminator,
)
from .kernels import (
    dense_rank,
    l2_normalize_rows,
    nuclear_norm,
    pairwise_similarity,
    row_entropies,
    shannon_entropy,
    softmax,
)
from .ranking import (
    DegenerateInputError,
    NoisePoint,
    ScoreTable,
    TaskAverage,
    aatn,
    aatn_summary,
    avg_wsc_across_tasks,
    noise_resilience,
    quadratic_weights,
    spearman,
    weighted_pearson,
    weighted_ranks,
    weighted_spearman,
    wsc_per_task,
    wsc_summary,
)
from .store import (
    BenchmarkIndex,
    CheckpointFormatError,
    CheckpointRecord,
    CheckpointRef,
    SplitData,
    load_checkpoint,
    save_checkpoint,
    scan_benchmark,
    validate_record,
)
from .synth import (
    SynthConfig,
    analytic_accuracy,
    generate_benchmark,
    inject_pathology,
    make_checkpoint_record,
    oracle_accuracy,
)
from .validators import (
    Score,
    ValidatorVariant,
    accuracy_score,
    all_variants,
    bnm_score,
    class_ami_score,
    class_ss_score,
    dev_formula,
    dev_score,
    devn_score,
    entropy_score,
    max_normalize_weights,
    score_all,
    score_benchmark,
    snd_score,
    variants_by_name,
)
