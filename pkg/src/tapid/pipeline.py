"""End-to-end glue: sessions -> images/features -> CNN -> few-shot report."""

from __future__ import annotations

from dataclasses import replace
from typing import Sequence

import numpy as np

from .classify import KernelSpec
from .dataio.artifacts import EmbeddingBatch
from .dataio.sessions import group_by_user
from .encoding import SignalSequence, encode_image, IMAGE_SEQUENCE
from .features import extract_handcrafted
from .neuralnet.model import Checkpoint, NetworkSpec, extract_embeddings
from .neuralnet.training import TrainConfig, train_runs
from .protocol import (
    FewShotCounts,
    IdentificationReport,
    UserSplit,
    build_fewshot_tasks,
    run_identification,
    train_val_split,
)
from .signal import TapSession, normalize_signal, resample_session


def encode_session(session: TapSession, seq: SignalSequence | None = None, rescale: str = "global"):
    signals = np.stack([normalize_signal(row) for row in resample_session(session)])
    return encode_image(signals, seq or SignalSequence(IMAGE_SEQUENCE), rescale, session.user_id, session.tap_index)


def encode_sessions(sessions: Sequence[TapSession], rescale: str = "global") -> np.ndarray:
    seq = SignalSequence(IMAGE_SEQUENCE)
    return np.stack([encode_session(s, seq, rescale).pixels for s in sessions])


def handcrafted_batch(sessions: Sequence[TapSession]) -> EmbeddingBatch:
    vecs = np.stack([extract_handcrafted(resample_session(s)) for s in sessions])
    return EmbeddingBatch([s.key for s in sessions], vecs, source="handcrafted")


def multiclass_sets(sessions: Sequence[TapSession], users: Sequence[str], rescale: str = "global"):
    """Images and dense labels for the pre-training users, 80/20 by tap order."""
    by_user = group_by_user(sessions)
    train_idx, val_idx, labels = [], [], []
    flat = []
    for label, user in enumerate(sorted(users)):
        taps = by_user[user]
        tr, va = train_val_split([s.tap_index for s in taps])
        tr, va = set(tr), set(va)
        for s in taps:
            (train_idx if s.tap_index in tr else val_idx).append(len(flat))
            flat.append(s)
            labels.append(label)
    images = encode_sessions(flat, rescale)
    labels = np.asarray(labels, dtype=np.int64)
    return (images[train_idx], labels[train_idx]), (images[val_idx], labels[val_idx])


def pretrain(sessions, split: UserSplit, spec: NetworkSpec, config: TrainConfig, rescale: str = "global"):
    train_set, val_set = multiclass_sets(sessions, split.pretrain_users, rescale)
    spec = replace(spec, num_classes=len(split.pretrain_users))
    return train_runs(spec, config, train_set, val_set)


def embed_sessions(ckpt: Checkpoint, sessions: Sequence[TapSession], rescale: str = "global") -> EmbeddingBatch:
    vectors = extract_embeddings(ckpt, encode_sessions(sessions, rescale))
    return EmbeddingBatch([s.key for s in sessions], vectors, source="cnn")


def fewshot_tasks(sessions, split: UserSplit, seed: int, counts: FewShotCounts | None = None):
    by_user = group_by_user(sessions)
    users = list(split.identification_users)
    taps = {u: [s.tap_index for s in by_user[u]] for u in users}
    if counts is None:
        counts = FewShotCounts.scaled(min(len(v) for v in taps.values()))
    return build_fewshot_tasks(users, taps, seed=seed, counts=counts)


def identify(tasks, batch: EmbeddingBatch, kernel: KernelSpec, c: float, provider: str | None = None) -> IdentificationReport:
    lookup = batch.as_dict()
    report = run_identification(tasks, lookup, kernel, c, provider=provider or batch.source)
    return report
