"""Automatic accuracy estimation for question answering systems.

Builds judge training data from annotated corpora, trains point-wise
answer-correctness judges (a lexical linear baseline and encoder-based
models, including peer-attention), and aggregates point-wise judgements
into system-level accuracy, ranking metrics, and comparison reports.
"""

__version__ = "0.1.0"

from .corpus import (
    AS2Record,
    As2Label,
    CandidateSet,
    DatasetStats,
    EvalTuple,
    MRDocument,
    build_eval_tuples,
    dataset_stats,
    derive_as2,
    filter_multi_answer,
)
from .encoder import EncoderConfig, TinyEncoder, Vocabulary, concat_text, peer_encode
from .evaluators import EvaluatorConfig, EvaluatorModel, Family, TrainConfig
from .harness import OracleJudge, ReferenceSet, SystemRun, compare_systems
from .lexical import FeatureVector, LinearModel, featurize, sim_text, sim_token, tokenize
from .metrics import MetricReport, RankedList, kendall_tau_b, precision_recall_f1, rmse
