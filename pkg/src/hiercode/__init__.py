"""Hierarchy-aware transformer models for source code.

The public surface: syntax extraction (tokenize_program, project_hierarchy),
encoding (Vocabulary, encode_and_pad), the model stack (HiTClassifierModel,
HiTGeneratorModel), scikit-learn style estimators (HiTClassifier,
HiTNameGenerator, HierarchyExtractor, VariableScopeProbe), task metrics,
and the scope probe. The `hiercode` console script exposes the same
functionality as subcommands.
"""

from .config import HiTConfig, TrainSchedule, load_config_file, parse_config_text
from .data import Example, LoadedDataset, generate_synthetic, load_dataset, write_jsonl
from .encoding import (
    Batch,
    Vocabulary,
    build_copy_map,
    build_vocab,
    encode_and_pad,
    encode_generation_targets,
    subtokenize_name,
)
from .estimators import (
    HierarchyExtractor,
    HiTClassifier,
    HiTNameGenerator,
    VariableScopeProbe,
)
from .metrics import (
    accuracy,
    category_tfidf_similarity,
    corpus_subtoken_prf,
    map_at_r,
    subtoken_prf,
)
from .model import HiTClassifierModel, HiTEncoder, param_report
from .pointer import HiTGeneratorModel, PointerDecoder, join_camel_case
from .scope import ScopeProbe, run_probe, sample_pairs, score_pair
from .syntax import (
    HIERARCHY_MODES,
    HierarchyPath,
    NodeTypeVocabulary,
    TokenizedProgram,
    extract_token_paths,
    parse_to_cst,
    project_hierarchy,
    tokenize_program,
)
from .training import FitResult, classification_loss, fit, scope_pair_loss, seed_everything

__version__ = "0.1.0"

__all__ = [
    "Batch",
    "Example",
    "FitResult",
    "HIERARCHY_MODES",
    "HierarchyExtractor",
    "HierarchyPath",
    "HiTClassifier",
    "HiTClassifierModel",
    "HiTConfig",
    "HiTEncoder",
    "HiTGeneratorModel",
    "HiTNameGenerator",
    "LoadedDataset",
    "NodeTypeVocabulary",
    "PointerDecoder",
    "ScopeProbe",
    "TokenizedProgram",
    "TrainSchedule",
    "VariableScopeProbe",
    "Vocabulary",
    "accuracy",
    "build_copy_map",
    "build_vocab",
    "category_tfidf_similarity",
    "classification_loss",
    "corpus_subtoken_prf",
    "encode_and_pad",
    "encode_generation_targets",
    "extract_token_paths",
    "fit",
    "generate_synthetic",
    "join_camel_case",
    "load_config_file",
    "load_dataset",
    "map_at_r",
    "param_report",
    "parse_config_text",
    "parse_to_cst",
    "project_hierarchy",
    "run_probe",
    "sample_pairs",
    "scope_pair_loss",
    "score_pair",
    "subtoken_prf",
    "subtokenize_name",
    "seed_everything",
    "tokenize_program",
    "write_jsonl",
]
