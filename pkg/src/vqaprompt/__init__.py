"""Answer-heuristics prompting pipeline for knowledge-based VQA."""

from .artifacts import (
    AnswerCandidate,
    AnswerVocabulary,
    Dataset,
    FeatureBank,
    GroupedFeatureBank,
    Sample,
    load_feature_bank,
    load_grouped_bank,
    load_manifest,
    save_feature_bank,
    save_grouped_bank,
    save_manifest,
)
from .beam import AutoregressiveScorer, HttpScorer, TableScorer, beam_search
from .evaluation import EvalReport, behavior_classify, hit_rate, soft_score, stage_confusion
from .gateway import CompletionRequest, CompletionResult, HttpGateway, parse_answer
from .heuristics import (
    ExampleSelection,
    combined_knn,
    cosine_knn,
    group_similarity,
    grouped_knn,
    stage1_top1,
    top_k_candidates,
)
from .pipeline import RunConfig, replay_eval, run_pipeline
from .prompts import PromptBundle, PromptConfig, build_prompts, partition_examples
from .voting import majority_vote, normalize_answer, project_to_choice

__version__ = "0.1.0"

__all__ = [
    "AnswerCandidate",
    "AnswerVocabulary",
    "AutoregressiveScorer",
    "CompletionRequest",
    "CompletionResult",
    "Dataset",
    "EvalReport",
    "ExampleSelection",
    "FeatureBank",
    "GroupedFeatureBank",
    "HttpGateway",
    "HttpScorer",
    "PromptBundle",
    "PromptConfig",
    "RunConfig",
    "Sample",
    "TableScorer",
    "beam_search",
    "behavior_classify",
    "build_prompts",
    "combined_knn",
    "cosine_knn",
    "group_similarity",
    "grouped_knn",
    "hit_rate",
    "load_feature_bank",
    "load_grouped_bank",
    "load_manifest",
    "majority_vote",
    "normalize_answer",
    "parse_answer",
    "partition_examples",
    "project_to_choice",
    "replay_eval",
    "run_pipeline",
    "save_feature_bank",
    "save_grouped_bank",
    "save_manifest",
    "soft_score",
    "stage1_top1",
    "stage_confusion",
    "top_k_candidates",
    "__version__",
]
