"""Dual-quality review detection toolkit.

Detects consumer reviews reporting that the "same" product differs between
national markets, and grows its own training corpus through an iterative
train -> score pool -> select top-K -> human verification loop. Ships a
lexicon baseline, a few-shot embedding classifier with a from-scratch
logistic head, prompt-based chat-model classification, an evaluation and
robustness harness, the bootstrap engine, and an analyst-facing HTTP
service.
"""

from .baseline import Lexicon, classify_baseline, default_lexicon, normalize_text
from .bootstrap import (AnnotationBatch, AnnotationDecision, BootstrapRun, IterationRecord,
                        RunConfig, audit_labels, seed_base_dataset, select_candidates)
from .classify import (ContrastivePair, EncoderBackend, EncoderConfig, EncoderTrainer,
                       FewShotClassifier, FewShotConfig, FittedFewShot, HeadConfig, LogisticHead,
                       binary_collapse, checked_probability_rows, generate_contrastive_pairs,
                       load_snapshot, predict, save_snapshot, train_head)
from .corpus import (Dataset, DatasetStats, Review, SplitSizes, compute_stats, from_reviews,
                     load_dataset, save_dataset, stratified_split)
from .embeddings import EmbeddingBackend, HashingEmbedding, backend_from_descriptor
from .evaluation import (ClassMetrics, ConfusionMatrix, EvaluationReport, RunAggregate,
                         aggregate_runs, evaluate, sum_confusions)
from .labels import LABEL_ORDER, Label, Prediction, ProblemSubtype, SubtypeKind
from .llm import (HttpChatClient, LLMClientConfig, PromptTemplate, PromptVariant, StubChatServer,
                  build_prompt, classify_with_llm, load_template, parse_label)
from .robustness import DisagreementReport, PerturbationKind, disagreement, perturb
from .service import ReviewService, ServiceConfig, ServiceServer
from .simulate import SimulationResult, simulate_bootstrap
from .synthetic import fixture_dataset, planted_pool, seed_examples

__version__ = "0.1.0"
