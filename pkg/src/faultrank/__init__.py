"""faultrank: execute sampled candidate programs against unit tests, extract
fine-grained fault labels, train fault-aware rankers, and evaluate ranking
quality with pass@k / exec@k and their ranked variants."""

from .dataset import (
    ClassStats,
    DatasetSplits,
    EmptyPartition,
    RankerExample,
    SplitSpec,
    build_dataset,
    compute_class_weights,
    compute_stats,
    merge_datasets,
)
from .features import FeatureConfig, count_encoded_lines, featurize, featurize_lines, tokenize
from .harness import (
    Candidate,
    DriverUnavailable,
    ExecutionLimits,
    ExecutionReport,
    MissingTask,
    Outcome,
    Status,
    Task,
    TestFormat,
    TestResult,
    ValidationError,
    execute_candidate,
    execute_corpus,
)
from .metrics import (
    DomainError,
    JoinError,
    MissingRank,
    TaskOutcomeSummary,
    evaluate_corpus,
    exec_at_k,
    pass_at_k,
    ranked_exec_at_k,
    ranked_pass_at_k,
    summarize_reports,
)
from .ranker import (
    CorruptFile,
    LabelMismatch,
    MissingLogprob,
    RankerModel,
    TrainConfig,
    VersionMismatch,
    load_model,
    predict,
    rank,
    rank_by_logprob,
    save_model,
    score,
    train,
)
from .synthetic import SyntheticCorpus, generate_corpus
from .taxonomy import (
    ContractViolation,
    EXEC_ERROR_CLASSES,
    FaultLabelSet,
    INTENT_ERROR_CLASSES,
    classify_execution_error,
    classify_intent_error,
    label_report,
    outputs_equivalent,
)

__version__ = "0.1.0"
