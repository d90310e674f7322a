"""dialret: dialog-driven text-to-video retrieval engine and simulation
harness, with an HTTP session service for human-in-the-loop studies."""

__version__ = "0.1.0"

from dialret.corpus import (
    Corpus,
    DialogHistory,
    EMPTY_HISTORY,
    QAPair,
    SyntheticConfig,
    VideoRecord,
    gen_synthetic,
    load_corpus,
    save_corpus,
)
from dialret.dialog import Policy, Session, ask, answer_oracle, run_experiment, run_session
from dialret.encoders import Encoder, EncoderSpec, fit_encoder
from dialret.evaluation import compare_policies, compute_metrics, per_round_report
from dialret.igs import build_igs_dataset, export_igs, select_best_qa
from dialret.retrieval import (
    Batch,
    Index,
    RetrievalResult,
    build_index,
    build_query_context,
    loss_gradients,
    loss_sym,
    loss_t2v,
    loss_v2t,
    train_linear_projection,
    vrm,
)

__all__ = [
    "Corpus", "DialogHistory", "EMPTY_HISTORY", "QAPair", "SyntheticConfig",
    "VideoRecord", "gen_synthetic", "load_corpus", "save_corpus",
    "Policy", "Session", "ask", "answer_oracle", "run_experiment", "run_session",
    "Encoder", "EncoderSpec", "fit_encoder",
    "compare_policies", "compute_metrics", "per_round_report",
    "build_igs_dataset", "export_igs", "select_best_qa",
    "Batch", "Index", "RetrievalResult", "build_index", "build_query_context",
    "loss_gradients", "loss_sym", "loss_t2v", "loss_v2t",
    "train_linear_projection", "vrm",
]
