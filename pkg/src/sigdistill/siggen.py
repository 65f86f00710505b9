"""Synthesis of labeled I/Q modulation datasets with AWGN.

Six digital schemes with rectangular pulse shaping keep the waveforms
analytically checkable: linear constellations are normalized to unit
average power, CPFSK (modulation index 0.5) has a constant envelope.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dataio import LabeledSignalSet, SignalRecord
from .errors import ValidationError


@dataclass(frozen=True)
class ModulationScheme:
    """A constellation (linear schemes) or phase-modulation rule (CPFSK)."""

    name: str
    constellation: np.ndarray | None = None
    modulation_index: float | None = None

    def __post_init__(self):
        if (self.constellation is None) == (self.modulation_index is None):
            raise ValidationError(
                f"{self.name}: exactly one of constellation/modulation_index required"
            )
        if self.constellation is not None:
            points = np.asarray(self.constellation, dtype=np.complex128)
            power = float(np.mean(np.abs(points) ** 2))
            if abs(power - 1.0) > 1e-6:
                raise ValidationError(f"{self.name}: mean constellation power {power} != 1")
            points.setflags(write=False)
            object.__setattr__(self, "constellation", points)

    @property
    def is_linear(self) -> bool:
        return self.constellation is not None

    @property
    def alphabet_size(self) -> int:
        if self.constellation is not None:
            return len(self.constellation)
        return 2  # binary CPFSK


def _unit_power(points) -> np.ndarray:
    points = np.asarray(points, dtype=np.complex128)
    return points / math.sqrt(float(np.mean(np.abs(points) ** 2)))


def _qam16_points() -> np.ndarray:
    levels = np.array([-3.0, -1.0, 1.0, 3.0])
    grid = levels[:, None] + 1j * levels[None, :]
    return _unit_power(grid.ravel())


SCHEMES: dict[str, ModulationScheme] = {
    "BPSK": ModulationScheme("BPSK", constellation=np.array([1.0, -1.0])),
    "QPSK": ModulationScheme(
        "QPSK", constellation=_unit_power([1 + 1j, -1 + 1j, -1 - 1j, 1 - 1j])
    ),
    "8PSK": ModulationScheme(
        "8PSK", constellation=np.exp(2j * np.pi * np.arange(8) / 8)
    ),
    "PAM4": ModulationScheme("PAM4", constellation=_unit_power([-3.0, -1.0, 1.0, 3.0])),
    "QAM16": ModulationScheme("QAM16", constellation=_qam16_points()),
    "CPFSK": ModulationScheme("CPFSK", modulation_index=0.5),
}


def get_scheme(name: str) -> ModulationScheme:
    try:
        return SCHEMES[name]
    except KeyError:
        raise ValidationError(
            f"unknown scheme {name!r}; available: {sorted(SCHEMES)}"
        ) from None


def default_schemes() -> tuple[ModulationScheme, ...]:
    return tuple(SCHEMES.values())


@dataclass(frozen=True)
class GenConfig:
    """Generator settings for one dataset."""

    schemes: tuple[ModulationScheme, ...] = field(default_factory=default_schemes)
    n_per_class: int = 1250
    n_samples: int = 128
    samples_per_symbol: int = 8
    snr_db_min: int = 10
    snr_db_max: int = 18
    snr_db_step: int = 2
    seed: int = 0

    def __post_init__(self):
        if not self.schemes:
            raise ValidationError("at least one scheme required")
        if self.n_per_class < 1:
            raise ValidationError("n_per_class must be >= 1")
        if self.n_samples < 1 or self.n_samples % self.samples_per_symbol != 0:
            raise ValidationError(
                f"n_samples={self.n_samples} must be a positive multiple of "
                f"samples_per_symbol={self.samples_per_symbol}"
            )
        if self.snr_db_step < 1 or self.snr_db_max < self.snr_db_min:
            raise ValidationError("snr range is empty")

    @property
    def snr_levels(self) -> tuple[int, ...]:
        return tuple(range(self.snr_db_min, self.snr_db_max + 1, self.snr_db_step))


def modulate(
    scheme: ModulationScheme, symbols, samples_per_symbol: int, label: int = 0
) -> SignalRecord:
    """Map a symbol stream to a baseband I/Q waveform.

    Linear schemes hold each constellation point for ``samples_per_symbol``
    samples (rectangular pulse); CPFSK accumulates phase continuously.
    """
    symbols = np.asarray(symbols, dtype=np.int64)
    if symbols.ndim != 1 or symbols.size == 0:
        raise ValidationError("symbols must be a nonempty 1-D sequence")
    if samples_per_symbol < 1:
        raise ValidationError("samples_per_symbol must be >= 1")
    if symbols.min() < 0 or symbols.max() >= scheme.alphabet_size:
        raise ValidationError(
            f"symbol out of alphabet [0, {scheme.alphabet_size}) for {scheme.name}"
        )

    if scheme.is_linear:
        points = scheme.constellation[symbols]
        waveform = np.repeat(points, samples_per_symbol)
        i_channel, q_channel = waveform.real, waveform.imag
    else:
        # binary CPFSK: phase advances by pi*h*a per symbol, a in {-1,+1}
        a = np.repeat(2 * symbols - 1, samples_per_symbol).astype(np.float64)
        phase = np.cumsum(np.pi * scheme.modulation_index * a / samples_per_symbol)
        i_channel, q_channel = np.cos(phase), np.sin(phase)
    return SignalRecord(i_channel=i_channel, q_channel=q_channel, label=label)


def add_awgn(
    record: SignalRecord, snr_db: int | None, rng: np.random.Generator
) -> SignalRecord:
    """Add white Gaussian noise at the requested SNR.

    Per-complex-sample noise power is P_signal / 10^(snr_db/10), split
    evenly between I and Q. ``snr_db=None`` is the no-noise mode.
    """
    if snr_db is None:
        return record
    i = record.i_channel.astype(np.float64)
    q = record.q_channel.astype(np.float64)
    signal_power = float(np.mean(i * i + q * q))
    if signal_power <= 0.0:
        raise ValidationError("cannot set an SNR on a zero-power record")
    noise_power = signal_power / (10.0 ** (snr_db / 10.0))
    sigma = math.sqrt(noise_power / 2.0)
    n = record.n_samples
    i_noisy = i + rng.normal(0.0, sigma, n)
    q_noisy = q + rng.normal(0.0, sigma, n)
    return SignalRecord(i_channel=i_noisy, q_channel=q_noisy, label=record.label, snr_db=snr_db)


def generate_dataset(cfg: GenConfig) -> LabeledSignalSet:
    """Generate ``n_per_class`` noisy records per scheme, deterministically.

    Each class draws from its own seeded stream, so classes can be
    regenerated (or parallelized) independently.
    """
    n_symbols = cfg.n_samples // cfg.samples_per_symbol
    levels = cfg.snr_levels
    records = []
    for c, scheme in enumerate(cfg.schemes):
        rng = np.random.default_rng([cfg.seed, c])
        for _ in range(cfg.n_per_class):
            symbols = rng.integers(0, scheme.alphabet_size, n_symbols)
            snr_db = int(levels[rng.integers(0, len(levels))])
            clean = modulate(scheme, symbols, cfg.samples_per_symbol, label=c)
            records.append(add_awgn(clean, snr_db, rng))
    class_names = tuple(s.name for s in cfg.schemes)
    return LabeledSignalSet(tuple(records), class_names, cfg.n_samples)
