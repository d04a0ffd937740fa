from .artifacts import (
    EmbeddingBatch,
    checkpoint_bytes,
    checkpoint_from_bytes,
    embeddings_bytes,
    embeddings_from_bytes,
    load_checkpoint,
    load_embeddings,
    load_svm,
    save_checkpoint,
    save_embeddings,
    save_svm,
    svm_bytes,
    svm_from_bytes,
)
from .sessions import (
    dumps_sessions,
    group_by_user,
    iter_sessions,
    load_sessions,
    record_to_session,
    save_sessions,
    session_to_record,
)
from .synth import SynthConfig, synth_generate, user_profile

__all__ = [
    "EmbeddingBatch",
    "SynthConfig",
    "checkpoint_bytes",
    "checkpoint_from_bytes",
    "dumps_sessions",
    "embeddings_bytes",
    "embeddings_from_bytes",
    "group_by_user",
    "iter_sessions",
    "load_checkpoint",
    "load_embeddings",
    "load_sessions",
    "load_svm",
    "record_to_session",
    "save_checkpoint",
    "save_embeddings",
    "save_sessions",
    "save_svm",
    "session_to_record",
    "svm_bytes",
    "svm_from_bytes",
    "synth_generate",
    "user_profile",
]
