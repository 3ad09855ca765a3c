"""Temporal phenotype discovery by convolutional decomposition of irregular
binary tensors: shared temporal phenotypes, per-individual pathways, trained
by alternating projected gradient descent under a Bernoulli loss."""

from .errors import (
    CorruptFile,
    EmptyTensor,
    FeatureMismatch,
    InfeasibleConfig,
    NonBinaryValue,
    NonFiniteLoss,
    ParseError,
    RaggedFeatureDim,
    RankMismatch,
    RankTooSmall,
    ShapeMismatch,
    TemphenoError,
    TimeOutOfRange,
    TooFewIndividuals,
    UnequalLengths,
    UnknownFeature,
    VersionMismatch,
    WindowTooLarge,
    ZeroNormGroundTruth,
)
from .io import (
    EventRecord,
    ModelFile,
    RunReport,
    dataset_digest,
    load_events,
    load_model,
    load_pathways,
    save_model,
    save_pathways,
    save_report,
    write_events,
)
from .loss import (
    Gradients,
    LossBreakdown,
    bernoulli_loss,
    gradients,
    nonsuccession_term,
    sparsity_term,
    total_loss,
)
from .metrics import (
    FitReport,
    Matching,
    diversity,
    fit,
    fit_p,
    fit_report,
    fit_w,
    linear_assignment,
    match_phenotypes,
    phenotype_cosine,
)
from .optim import TrainConfig, TrainedModel, init, project, split, train
from .synth import (
    GenConfig,
    NoiseSpec,
    add_noise,
    generate,
    generate_repeated_event_phenotypes,
)
from .tensor import (
    HyperParams,
    IrregularTensor,
    PathwayCollection,
    PhenotypeTensor,
    reconstruct,
    reconstruct_all,
    reconstruct_batched_regular,
    validate_tensor,
)

__version__ = "0.1.0"
