import numpy as np
import pytest

from sigdistill.dataio import LabeledSignalSet, SignalRecord


def random_signal_set(
    n_per_class: int,
    num_classes: int = 2,
    n_samples: int = 16,
    seed: int = 0,
    with_snr: bool = True,
) -> LabeledSignalSet:
    """A synthetic random-noise dataset for plumbing tests."""
    rng = np.random.default_rng(seed)
    records = []
    for c in range(num_classes):
        for _ in range(n_per_class):
            records.append(
                SignalRecord(
                    i_channel=rng.normal(size=n_samples),
                    q_channel=rng.normal(size=n_samples),
                    label=c,
                    snr_db=int(rng.integers(0, 20)) if with_snr else None,
                )
            )
    names = tuple(f"class{c}" for c in range(num_classes))
    return LabeledSignalSet(tuple(records), names, n_samples)


@pytest.fixture
def tiny_set() -> LabeledSignalSet:
    return random_signal_set(n_per_class=6, num_classes=2, n_samples=16, seed=11)
