"""Distribution-matching losses and the distillation loops.

Per iteration: sample a fresh untrained embedding network, sample a real
batch per class, compute the squared distance between per-class mean
embeddings of real and synthetic data (in the time domain, and
optionally in the DFT-magnitude domain), and take a plain gradient step
on the synthetic samples.

Matching is class-conditional: the loss is summed over classes rather
than taken over pooled means, which would collapse class information.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor, no_grad
from .dataio import LabeledSignalSet, SignalRecord, SyntheticSet, take_per_class
from .errors import TrainingDiverged, ValidationError
from .networks import EmbeddingNet, resolve_arch, sample_network
from .spectral import dft_magnitude, dft_magnitude_op

REPORT_EVERY = 100


def _worker_count() -> int:
    raw = os.environ.get("SIGDISTILL_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValidationError(f"SIGDISTILL_THREADS must be an integer, got {raw!r}") from None


@dataclass(frozen=True)
class DistillConfig:
    """Hyperparameters of one distillation run."""

    iterations: int = 20_000
    lr: float = 1e-4
    alpha: float = 1.0
    spc: int = 10
    real_batch_per_class: int = 256
    arch: str = "cnn2"
    seed: int = 0
    scale_freq_inputs: bool = False  # optional 1/N scaling of magnitudes, off by default

    def __post_init__(self):
        if self.iterations < 1:
            raise ValidationError("iterations must be >= 1")
        if self.lr < 0:
            raise ValidationError("lr must be >= 0")
        if self.alpha < 0:
            raise ValidationError("alpha must be >= 0")
        if self.spc < 1:
            raise ValidationError("spc must be >= 1")
        if self.real_batch_per_class < 1:
            raise ValidationError("real_batch_per_class must be >= 1")
        if self.seed < 0:
            raise ValidationError("seed must be >= 0")


@dataclass(frozen=True)
class LossReport:
    iteration: int
    l_td: float
    l_fd: float
    l_total: float


def synthetic_leaf_tensors(synth: SyntheticSet, dtype=np.float32) -> list[Tensor]:
    """Per-class [spc, 2, N] gradient-tracking tensors, class-major order."""
    leaves = []
    for batch in synth.base.stacked_by_class():
        leaves.append(Tensor(batch.astype(dtype), requires_grad=True))
    return leaves


def _as_leaves(synth, dtype) -> list[Tensor]:
    if isinstance(synth, SyntheticSet):
        return synthetic_leaf_tensors(synth, dtype)
    return list(synth)


def _embedding_match_loss(
    net: EmbeddingNet, real_batches: Sequence[np.ndarray], synth_inputs: Sequence[Tensor]
) -> Tensor:
    if len(real_batches) != len(synth_inputs):
        raise ValidationError(
            f"{len(real_batches)} real batches vs {len(synth_inputs)} synthetic classes"
        )
    dtype = synth_inputs[0].dtype
    for c, (batch, synth_c) in enumerate(zip(real_batches, synth_inputs)):
        if len(batch) == 0 or synth_c.shape[0] == 0:
            raise ValidationError(f"class {c}: empty batch or synthetic slice")

    def real_mean(batch) -> Tensor:
        with no_grad():
            return ad.mean_over_batch(net.forward(Tensor(np.asarray(batch, dtype=dtype))))

    # per-class real means are independent; compute them in parallel when
    # asked to, and always reduce in class-index order
    workers = _worker_count()
    if workers > 1 and len(real_batches) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            real_means = list(pool.map(real_mean, real_batches))
    else:
        real_means = [real_mean(batch) for batch in real_batches]

    total = None
    for mean_c, synth_c in zip(real_means, synth_inputs):
        synth_mean = ad.mean_over_batch(net.forward(synth_c))
        term = ad.sum_of_squares(ad.sub(mean_c, synth_mean))
        total = term if total is None else ad.add(total, term)
    return total


def loss_time_domain(net: EmbeddingNet, real_batches, synth, dtype=np.float32) -> Tensor:
    """Sum over classes of ||mean embedding(real batch) - mean embedding(synth)||^2.

    ``synth`` may be a SyntheticSet or the per-class leaf tensors of an
    ongoing optimization; the loss is differentiable with respect to the
    synthetic samples only.
    """
    return _embedding_match_loss(net, real_batches, _as_leaves(synth, dtype))


def loss_freq_domain(
    net: EmbeddingNet,
    real_batches,
    synth,
    dtype=np.float32,
    real_in_frequency: bool = False,
    input_scale: float = 1.0,
) -> Tensor:
    """Same matching loss with both sides passed through the DFT magnitude.

    The same network instance must be used as for the time-domain loss
    within an iteration. ``real_in_frequency`` lets callers reuse
    precomputed real-side spectra.
    """
    leaves = _as_leaves(synth, dtype)
    if real_in_frequency:
        real_freq = [np.asarray(b) for b in real_batches]
    else:
        real_freq = [dft_magnitude(np.asarray(b)) for b in real_batches]
    if input_scale != 1.0:
        real_freq = [b * input_scale for b in real_freq]
    synth_freq = [dft_magnitude_op(t) for t in leaves]
    if input_scale != 1.0:
        synth_freq = [ad.scalar_mul(t, input_scale) for t in synth_freq]
    return _embedding_match_loss(net, real_freq, synth_freq)


def combined_loss(l_td, l_fd, alpha: float):
    """Total objective l_td + alpha * l_fd (scalar tensors or floats)."""
    if isinstance(l_td, Tensor):
        return ad.add(l_td, ad.scalar_mul(l_fd, alpha))
    return l_td + alpha * l_fd


def _iteration_streams(seed: int, k: int) -> tuple[int, np.random.Generator]:
    """Deterministic per-iteration network seed and batch-sampling stream."""
    net_ss, batch_ss = np.random.SeedSequence([seed, k]).spawn(2)
    net_seed = int(net_ss.generate_state(1, np.uint64)[0])
    return net_seed, np.random.default_rng(batch_ss)


def _sample_batches(
    class_arrays: Sequence[np.ndarray], rng: np.random.Generator, per_class: int
) -> list[np.ndarray]:
    batches = []
    for arr in class_arrays:
        take = min(per_class, len(arr))
        batches.append(arr[rng.choice(len(arr), size=take, replace=False)])
    return batches


def _sgd_step(leaves: Sequence[Tensor], lr: float) -> None:
    for leaf in leaves:
        if leaf.grad is not None:
            leaf.data -= lr * leaf.grad
        leaf.zero_grad()


def _finalize(leaves: Sequence[Tensor], train: LabeledSignalSet, spc: int) -> SyntheticSet:
    records = []
    for c, leaf in enumerate(leaves):
        for row in leaf.data:
            records.append(SignalRecord(i_channel=row[0], q_channel=row[1], label=c))
    base = LabeledSignalSet(tuple(records), train.class_names, train.n_samples_per_channel)
    return SyntheticSet(base=base, spc=spc)


def _validate_run(train: LabeledSignalSet, cfg: DistillConfig) -> None:
    resolve_arch(cfg.arch)
    counts = train.class_counts()
    if min(counts) < max(cfg.spc, 1):
        raise ValidationError(
            f"every class needs >= {max(cfg.spc, 1)} records, got counts {counts}"
        )


def _distill_loop(
    train: LabeledSignalSet,
    cfg: DistillConfig,
    progress_sink: Callable[[LossReport], None] | None,
    with_frequency: bool,
) -> tuple[SyntheticSet, list[LossReport]]:
    _validate_run(train, cfg)
    arch = resolve_arch(cfg.arch)
    leaves = synthetic_leaf_tensors(take_per_class(train, cfg.spc, cfg.seed))
    class_arrays = train.stacked_by_class()
    class_freq = None
    freq_scale = 1.0
    if with_frequency:
        freq_scale = 1.0 / train.n_samples_per_channel if cfg.scale_freq_inputs else 1.0
        class_freq = [dft_magnitude(arr) for arr in class_arrays]

    reports: list[LossReport] = []
    for k in range(cfg.iterations):
        net_seed, batch_rng = _iteration_streams(cfg.seed, k)
        net = sample_network(arch, net_seed)
        idx = [
            batch_rng.choice(len(arr), size=min(cfg.real_batch_per_class, len(arr)), replace=False)
            for arr in class_arrays
        ]
        try:
            l_td = loss_time_domain(net, [a[i] for a, i in zip(class_arrays, idx)], leaves)
            if with_frequency:
                l_fd = loss_freq_domain(
                    net,
                    [a[i] for a, i in zip(class_freq, idx)],
                    leaves,
                    real_in_frequency=True,
                    input_scale=freq_scale,
                )
            # root excludes the frequency term entirely when alpha == 0 so the
            # update is bit-identical to the time-domain-only path
            if with_frequency and cfg.alpha != 0.0:
                root = combined_loss(l_td, l_fd, cfg.alpha)
            else:
                root = l_td
            ad.backward(root)
        except FloatingPointError as exc:
            raise TrainingDiverged(f"distillation diverged at iteration {k}: {exc}") from exc
        _sgd_step(leaves, cfg.lr)

        if k % REPORT_EVERY == 0 or k == cfg.iterations - 1:
            td = l_td.item()
            fd = l_fd.item() if with_frequency else 0.0
            report = LossReport(iteration=k, l_td=td, l_fd=fd, l_total=td + cfg.alpha * fd)
            reports.append(report)
            if progress_sink is not None:
                progress_sink(report)
    return _finalize(leaves, train, cfg.spc), reports


def mdm_distill(
    train: LabeledSignalSet,
    cfg: DistillConfig,
    progress_sink: Callable[[LossReport], None] | None = None,
) -> tuple[SyntheticSet, list[LossReport]]:
    """Multi-domain distillation: K iterations of matching in both domains.

    The synthetic set is initialized by per-class random selection with
    ``cfg.seed``; every iteration then draws a fresh network and fresh
    real batches from streams derived from (seed, iteration), so runs
    are fully deterministic. LossReports are emitted every
    ``REPORT_EVERY`` iterations and at the final one.
    """
    return _distill_loop(train, cfg, progress_sink, with_frequency=True)


def dm_distill(
    train: LabeledSignalSet,
    cfg: DistillConfig,
    progress_sink: Callable[[LossReport], None] | None = None,
) -> tuple[SyntheticSet, list[LossReport]]:
    """Time-domain-only distillation (the alpha = 0 reduction).

    Shares every sampling stream with :func:`mdm_distill`, so an
    ``alpha=0`` multi-domain run reproduces this path bit for bit.
    """
    if cfg.alpha != 0.0:
        cfg = replace(cfg, alpha=0.0)
    return _distill_loop(train, cfg, progress_sink, with_frequency=False)
