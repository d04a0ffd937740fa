"""Evaluation protocol, from user splits to significance tests."""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.stats import chi2

from .classify import KernelSpec, calibrate_bias, error_rates, grid_search_c, train_svm
from .errors import InvalidInputError

SampleRef = tuple  # (user_id, tap_index)


@dataclass(frozen=True)
class UserSplit:
    pretrain_users: tuple[str, ...]
    identification_users: tuple[str, ...]
    seed: int


def split_users(user_ids: Sequence[str], seed: int = 0) -> UserSplit:
    """Seeded shuffle; the first half pre-trains the CNN, the rest is held out."""
    ids = sorted(set(user_ids))
    if len(ids) != len(user_ids):
        raise InvalidInputError("user ids must be unique")
    if len(ids) % 2:
        raise InvalidInputError(f"need an even number of users, got {len(ids)}")
    order = np.random.default_rng(seed).permutation(len(ids))
    shuffled = [ids[i] for i in order]
    half = len(ids) // 2
    return UserSplit(tuple(shuffled[:half]), tuple(shuffled[half:]), seed)


def train_val_split(taps: Sequence[int], train_fraction: float = 0.8):
    """Split one user's taps by index order: first 80% train, rest validation."""
    ordered = sorted(taps)
    cut = int(round(len(ordered) * train_fraction))
    return ordered[:cut], ordered[cut:]


@dataclass(frozen=True)
class FewShotCounts:
    train_pos: int = 20
    train_neg: int = 100
    test_pos: int = 100
    test_neg: int = 100

    @classmethod
    def scaled(cls, taps_per_user: int, full_taps: int = 200) -> "FewShotCounts":
        """Shrink the full-scale counts in proportion to the taps per user."""
        f = taps_per_user / full_taps
        return cls(*(max(1, int(round(v * f))) for v in (20, 100, 100, 100)))


@dataclass(frozen=True)
class FewShotTask:
    target_user: str
    train_pos: tuple[SampleRef, ...]
    train_neg: tuple[SampleRef, ...]
    test_pos: tuple[SampleRef, ...]
    test_neg: tuple[SampleRef, ...]
    neg_pool_train: tuple[str, ...]
    neg_pool_test: tuple[str, ...]

    def audit(self) -> None:
        """Raise if any leakage invariant is violated."""
        if set(self.neg_pool_train) & set(self.neg_pool_test):
            raise AssertionError("negative pools overlap")
        if self.target_user in self.neg_pool_train or self.target_user in self.neg_pool_test:
            raise AssertionError("target user appears in a negative pool")
        train = set(self.train_pos) | set(self.train_neg)
        test = set(self.test_pos) | set(self.test_neg)
        if train & test:
            raise AssertionError("a sample is used for both training and testing")
        if {u for u, _ in self.train_neg} - set(self.neg_pool_train):
            raise AssertionError("train negative outside its pool")
        if {u for u, _ in self.test_neg} - set(self.neg_pool_test):
            raise AssertionError("test negative outside its pool")


def build_fewshot_tasks(
    identification_users: Sequence[str],
    samples_per_user: Mapping[str, Sequence[int]],
    seed: int = 0,
    counts: FewShotCounts = FewShotCounts(),
) -> list[FewShotTask]:
    """One binary task per identification user.

    Registration positives are the user's first taps, test positives the last
    ones. The other users are shuffled and halved into a training pool and a
    test pool (the training pool gets the extra user when the count is odd);
    negatives are drawn without replacement from the pooled taps of each.
    """
    users = list(identification_users)
    if len(users) < 3:
        raise InvalidInputError("need at least 3 users to form two non-empty negative pools")
    tasks = []
    for t, user in enumerate(users):
        taps = sorted(samples_per_user[user])
        if len(taps) < counts.train_pos + counts.test_pos:
            raise InvalidInputError(
                f"user {user} has {len(taps)} taps, need {counts.train_pos + counts.test_pos}"
            )
        train_pos = tuple((user, i) for i in taps[: counts.train_pos])
        test_pos = tuple((user, i) for i in taps[len(taps) - counts.test_pos :])

        rng = np.random.default_rng([seed, t])
        others = [u for u in users if u != user]
        others = [others[i] for i in rng.permutation(len(others))]
        cut = (len(others) + 1) // 2
        pool_a, pool_b = tuple(sorted(others[:cut])), tuple(sorted(others[cut:]))
        train_neg = _draw(pool_a, samples_per_user, counts.train_neg, rng)
        test_neg = _draw(pool_b, samples_per_user, counts.test_neg, rng)
        tasks.append(FewShotTask(user, train_pos, train_neg, test_pos, test_neg, pool_a, pool_b))
    return tasks


def _draw(pool, samples_per_user, k, rng):
    candidates = [(u, i) for u in pool for i in sorted(samples_per_user[u])]
    if len(candidates) < k:
        raise InvalidInputError(f"negative pool {pool} has {len(candidates)} samples, need {k}")
    picks = rng.choice(len(candidates), size=k, replace=False)
    return tuple(candidates[i] for i in sorted(picks))


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise InvalidInputError("confusion counts must be non-negative")

    @classmethod
    def from_predictions(cls, predicted, actual) -> "ConfusionMatrix":
        p = np.asarray(predicted) == 1
        a = np.asarray(actual) == 1
        return cls(
            tp=int(np.sum(p & a)), fp=int(np.sum(p & ~a)), fn=int(np.sum(~p & a)), tn=int(np.sum(~p & ~a))
        )


def confusion_metrics(cm: ConfusionMatrix) -> tuple[float, float, float]:
    """(accuracy, FAR, FRR)."""
    if cm.tp + cm.fn == 0 or cm.fp + cm.tn == 0:
        raise InvalidInputError("need at least one positive and one negative sample")
    total = cm.tp + cm.tn + cm.fp + cm.fn
    return (cm.tp + cm.tn) / total, cm.fp / (cm.fp + cm.tn), cm.fn / (cm.fn + cm.tp)


@dataclass(frozen=True)
class McNemarResult:
    statistic: float
    p_value: float
    significant: bool
    b: int
    c: int
    alpha: float


def mcnemar_test(correct_a, correct_b, alpha: float = 0.01) -> McNemarResult:
    """Continuity-corrected McNemar test on paired correctness vectors.

    ``b`` counts samples only A got right, ``c`` samples only B got right.
    """
    a = np.asarray(correct_a, dtype=bool)
    b_ = np.asarray(correct_b, dtype=bool)
    if a.shape != b_.shape:
        raise InvalidInputError("correctness vectors differ in length")
    return mcnemar_from_counts(int(np.sum(a & ~b_)), int(np.sum(~a & b_)), alpha)


def mcnemar_from_counts(b: int, c: int, alpha: float = 0.01) -> McNemarResult:
    """McNemar test from the two discordant counts."""
    if b < 0 or c < 0:
        raise InvalidInputError("discordant counts must be non-negative")
    if b + c == 0:
        return McNemarResult(0.0, 1.0, False, b, c, alpha)
    stat = (abs(b - c) - 1) ** 2 / (b + c)
    critical = chi2.ppf(1.0 - alpha, df=1)
    return McNemarResult(float(stat), float(chi2.sf(stat, df=1)), bool(stat > critical), b, c, alpha)


@dataclass
class TaskResult:
    user: str
    accuracy: float
    far: float
    frr: float
    calibrated_gap: float
    calibration_ok: bool
    test_gap: float
    c: float = math.nan
    samples: list = field(default_factory=list)
    correct: list = field(default_factory=list)


@dataclass
class IdentificationReport:
    provider: str
    kernel: str
    c: float
    tasks: list[TaskResult]
    config: dict = field(default_factory=dict)

    @property
    def aggregate(self) -> dict:
        if not self.tasks:
            return {"accuracy": math.nan, "far": math.nan, "frr": math.nan}
        return {
            "accuracy": float(np.mean([t.accuracy for t in self.tasks])),
            "far": float(np.mean([t.far for t in self.tasks])),
            "frr": float(np.mean([t.frr for t in self.tasks])),
        }

    def correctness(self) -> tuple[list, np.ndarray]:
        """All test samples (tagged with their task) and whether each was right."""
        refs, flags = [], []
        for t in self.tasks:
            refs += [(t.user, *s) for s in t.samples]
            flags += t.correct
        return refs, np.asarray(flags, dtype=bool)

    def to_json(self) -> dict:
        return {
            "provider": self.provider,
            "kernel": self.kernel,
            "c": self.c,
            "aggregate": self.aggregate,
            "config": self.config,
            "tasks": [
                {
                    "user": t.user,
                    "accuracy": t.accuracy,
                    "far": t.far,
                    "frr": t.frr,
                    "calibrated_gap": t.calibrated_gap,
                    "calibration_ok": t.calibration_ok,
                    "test_gap": t.test_gap,
                    "c": t.c,
                    "samples": [list(s) for s in t.samples],
                    "correct": [bool(v) for v in t.correct],
                }
                for t in self.tasks
            ],
        }

    @classmethod
    def from_json(cls, d: dict) -> "IdentificationReport":
        tasks = [
            TaskResult(
                user=t["user"],
                accuracy=t["accuracy"],
                far=t["far"],
                frr=t["frr"],
                calibrated_gap=t["calibrated_gap"],
                calibration_ok=t["calibration_ok"],
                test_gap=t["test_gap"],
                c=t.get("c", math.nan),
                samples=[tuple(s) for s in t["samples"]],
                correct=list(t["correct"]),
            )
            for t in d["tasks"]
        ]
        return cls(d["provider"], d["kernel"], d["c"], tasks, d.get("config", {}))

    def write_csv(self, path) -> None:
        cols = ["user", "accuracy", "far", "frr", "calibrated_gap", "calibration_ok", "test_gap", "c"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for t in self.tasks:
                w.writerow([getattr(t, c) for c in cols])

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2, sort_keys=True)


def run_identification(
    tasks: Sequence[FewShotTask],
    features: Callable[[SampleRef], np.ndarray] | Mapping,
    kernel: KernelSpec = KernelSpec(),
    c: float = 1.0,
    provider: str = "features",
    standardize: bool = True,
    c_grid: Sequence[float] | None = None,
    grid_seed: int = 0,
    workers: int = 1,
) -> IdentificationReport:
    """Train, calibrate and test one SVM per task.

    ``features`` maps a ``(user_id, tap_index)`` reference to a vector; a
    mapping works as well as a callable. With ``c_grid`` each task picks its
    own C by stratified cross-validation on its registration samples. Tasks
    are independent, so ``workers > 1`` evaluates them on a thread pool; the
    results are merged in task order and do not depend on the worker count.
    """
    lookup = features.__getitem__ if isinstance(features, Mapping) else features

    def one(task: FewShotTask) -> TaskResult:
        task.audit()
        train_refs = list(task.train_pos) + list(task.train_neg)
        y_train = np.array([1] * len(task.train_pos) + [-1] * len(task.train_neg))
        test_refs = list(task.test_pos) + list(task.test_neg)
        y_test = np.array([1] * len(task.test_pos) + [-1] * len(task.test_neg))
        x_train = np.stack([np.asarray(lookup(r), dtype=np.float64) for r in train_refs])
        x_test = np.stack([np.asarray(lookup(r), dtype=np.float64) for r in test_refs])

        task_c = c
        if c_grid is not None:
            folds = min(5, len(task.train_pos), len(task.train_neg))
            if folds < 2:
                raise InvalidInputError("grid search needs at least 2 registration samples per class")
            task_c, _ = grid_search_c(
                x_train, y_train, kernel, c_grid, folds=folds, seed=grid_seed, standardize=standardize
            )
        model = train_svm(x_train, y_train, kernel, task_c, standardize=standardize)
        model, cal = calibrate_bias(model, x_train, y_train)
        pred = model.predict(x_test)
        acc, far, frr = confusion_metrics(ConfusionMatrix.from_predictions(pred, y_test))
        return TaskResult(
            user=task.target_user,
            accuracy=acc,
            far=far,
            frr=frr,
            calibrated_gap=cal.gap,
            calibration_ok=cal.within_one_percent,
            test_gap=abs(far - frr),
            c=float(task_c),
            samples=[tuple(r) for r in test_refs],
            correct=[bool(v) for v in pred == y_test],
        )

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, tasks))
    else:
        results = [one(t) for t in tasks]
    config = {"standardize": standardize, "gamma": kernel.gamma}
    if c_grid is not None:
        config["c_grid"] = [float(v) for v in c_grid]
    return IdentificationReport(provider, kernel.kind, float(c), results, config)


def compare_reports(a: IdentificationReport, b: IdentificationReport, alpha: float = 0.01) -> McNemarResult:
    refs_a, ca = a.correctness()
    refs_b, cb = b.correctness()
    if [tuple(r) for r in refs_a] != [tuple(r) for r in refs_b]:
        raise InvalidInputError("reports were not evaluated on identical test samples")
    return mcnemar_test(ca, cb, alpha)


__all__ = [
    "ConfusionMatrix",
    "FewShotCounts",
    "FewShotTask",
    "IdentificationReport",
    "McNemarResult",
    "mcnemar_from_counts",
    "TaskResult",
    "UserSplit",
    "build_fewshot_tasks",
    "compare_reports",
    "confusion_metrics",
    "error_rates",
    "mcnemar_test",
    "run_identification",
    "split_users",
    "train_val_split",
]
