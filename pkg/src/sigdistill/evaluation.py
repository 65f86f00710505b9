"""Train classifiers from scratch on synthetic sets, score on real test data.

The protocol mirrors the distillation literature: n independent runs
with derived seeds, each training an embedding-preset-plus-linear-head
classifier by SGD with momentum on cross-entropy, then reporting mean
and (population) standard deviation of test accuracy. Training never
sees the test set; accuracy is computed separately.

The ``SIGDISTILL_THREADS`` environment variable caps how many runs
execute concurrently; results are reduced in run order either way, so
reports do not depend on scheduling.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor, no_grad
from .dataio import LabeledSignalSet, SyntheticSet
from .distill import DistillConfig, mdm_distill
from .errors import TrainingDiverged, ValidationError
from .networks import Classifier, build_classifier, resolve_arch


@dataclass(frozen=True)
class EvalConfig:
    arch: str = "cnn2"
    lr: float = 0.001
    momentum: float = 0.9
    batch_size: int = 128
    epochs: int = 300
    n_runs: int = 5
    seed: int = 0

    def __post_init__(self):
        if not self.lr > 0:
            raise ValidationError("lr must be > 0")
        if not 0.0 <= self.momentum < 1.0:
            raise ValidationError("momentum must be in [0, 1)")
        if self.batch_size < 1 or self.epochs < 1 or self.n_runs < 1:
            raise ValidationError("batch_size, epochs and n_runs must be >= 1")
        if self.seed < 0:
            raise ValidationError("seed must be >= 0")


@dataclass(frozen=True)
class EvalResult:
    mean_accuracy: float
    std_accuracy: float
    per_run: tuple[float, ...]
    config: EvalConfig


def _worker_count() -> int:
    raw = os.environ.get("SIGDISTILL_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValidationError(f"SIGDISTILL_THREADS must be an integer, got {raw!r}") from None


def train_classifier(synth: SyntheticSet, cfg: EvalConfig, run_seed: int) -> Classifier:
    """SGD-with-momentum training on cross-entropy over shuffled mini-batches."""
    if len(synth) == 0:
        raise ValidationError("synthetic set is empty")
    data, labels = synth.base.as_arrays()
    clf = build_classifier(
        cfg.arch,
        synth.base.n_samples_per_channel,
        synth.base.num_classes,
        seed=run_seed,
    )
    shuffle_rng = np.random.default_rng([run_seed, 2])
    velocities = [np.zeros_like(p.data) for p in clf.params]
    n = len(data)
    for epoch in range(cfg.epochs):
        order = shuffle_rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            try:
                logits = clf.forward(Tensor(data[batch]))
                loss = ad.softmax_cross_entropy(logits, labels[batch])
                ad.backward(loss)
            except FloatingPointError as exc:
                raise TrainingDiverged(f"classifier diverged at epoch {epoch}: {exc}") from exc
            for p, v in zip(clf.params, velocities):
                if p.grad is None:
                    continue
                v *= cfg.momentum
                v += p.grad
                p.data -= cfg.lr * v
                p.zero_grad()
    return clf


def predict(clf: Classifier, data: np.ndarray, chunk: int = 512) -> np.ndarray:
    """Argmax class predictions, batched, without building graphs."""
    preds = []
    with no_grad():
        for start in range(0, len(data), chunk):
            logits = clf.forward(Tensor(data[start : start + chunk]))
            preds.append(np.argmax(logits.data, axis=1))
    return np.concatenate(preds) if preds else np.zeros(0, dtype=np.int64)


def accuracy(clf: Classifier, test_data: np.ndarray, test_labels: np.ndarray) -> float:
    """Fraction of correct predictions, as a percentage."""
    preds = predict(clf, test_data)
    return float(100.0 * np.mean(preds == test_labels))


def _run_seed(seed: int, run: int) -> int:
    return int(np.random.SeedSequence([seed, run]).generate_state(1, np.uint64)[0])


def evaluate(synth: SyntheticSet, test: LabeledSignalSet, cfg: EvalConfig) -> EvalResult:
    """n_runs independent trainings with derived seeds, mean +- std accuracy."""
    if len(test) == 0:
        raise ValidationError("test set is empty")
    if synth.base.class_names != test.class_names:
        raise ValidationError(
            f"class mismatch: synthetic {synth.base.class_names} vs test {test.class_names}"
        )
    test_data, test_labels = test.as_arrays()

    def one_run(run: int) -> float:
        clf = train_classifier(synth, cfg, _run_seed(cfg.seed, run))
        return accuracy(clf, test_data, test_labels)

    workers = _worker_count()
    if workers > 1 and cfg.n_runs > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_run = tuple(pool.map(one_run, range(cfg.n_runs)))
    else:
        per_run = tuple(one_run(run) for run in range(cfg.n_runs))
    return EvalResult(
        mean_accuracy=float(np.mean(per_run)),
        std_accuracy=float(np.std(per_run)),
        per_run=per_run,
        config=cfg,
    )


def cross_arch_matrix(
    train: LabeledSignalSet,
    test: LabeledSignalSet,
    distill_archs: list[str],
    eval_archs: list[str],
    dcfg: DistillConfig,
    ecfg: EvalConfig,
) -> list[list[EvalResult]]:
    """Distill once per source architecture, evaluate on every target one."""
    for name in list(distill_archs) + list(eval_archs):
        resolve_arch(name)
    matrix = []
    for source in distill_archs:
        synth, _ = mdm_distill(train, replace(dcfg, arch=source))
        matrix.append([evaluate(synth, test, replace(ecfg, arch=target)) for target in eval_archs])
    return matrix
