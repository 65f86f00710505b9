"""Per-channel DFT magnitude: |sum_n x[n] e^(-2i pi kn/N)|, unnormalized.

A radix-2 iterative FFT serves power-of-two lengths; every other length
goes through the direct O(N^2) summation, which doubles as the oracle
for the fast path. The transform is also exposed as a differentiable
node so gradients can flow from frequency-domain losses back into
time-domain samples.

The magnitude is non-differentiable at 0; bins with |X[k]| below
``EPS_MAG`` contribute zero gradient (subgradient 0), which keeps the
optimization stable and only triggers on measure-zero inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor
from .dataio import SignalRecord
from .errors import ValidationError

EPS_MAG = 1e-12

_bitrev_cache: dict[int, np.ndarray] = {}
_twiddle_cache: dict[tuple[int, str], np.ndarray] = {}
_dft_matrix_cache: dict[tuple[int, str], np.ndarray] = {}


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def _complex_dtype(real_dtype) -> np.dtype:
    return np.dtype(np.complex64 if np.dtype(real_dtype) == np.float32 else np.complex128)


def _bitrev_indices(n: int) -> np.ndarray:
    cached = _bitrev_cache.get(n)
    if cached is not None:
        return cached
    bits = n.bit_length() - 1
    rev = np.zeros(n, dtype=np.intp)
    for i in range(1, n):
        rev[i] = (rev[i >> 1] >> 1) | ((i & 1) << (bits - 1))
    _bitrev_cache[n] = rev
    return rev


def _twiddle_table(n: int, cdtype: np.dtype) -> np.ndarray:
    key = (n, cdtype.str)
    cached = _twiddle_cache.get(key)
    if cached is not None:
        return cached
    table = np.exp(-2j * np.pi * np.arange(n // 2) / n).astype(cdtype)
    _twiddle_cache[key] = table
    return table


def _fft_pow2(x: np.ndarray) -> np.ndarray:
    """Iterative Cooley-Tukey FFT over the last axis; len must be 2^m."""
    n = x.shape[-1]
    if n == 1:
        return x.copy()
    y = np.ascontiguousarray(x[..., _bitrev_indices(n)])
    table = _twiddle_table(n, y.dtype)
    half = 1
    while half < n:
        m = 2 * half
        w = table[:: n // m]
        blocks = y.reshape(*y.shape[:-1], n // m, m)
        a = blocks[..., :half]
        b = blocks[..., half:] * w
        top = a + b
        bottom = a - b
        blocks[..., :half] = top
        blocks[..., half:] = bottom
        half = m
    return y


def _dft_matrix(n: int, cdtype: np.dtype) -> np.ndarray:
    key = (n, cdtype.str)
    cached = _dft_matrix_cache.get(key)
    if cached is not None:
        return cached
    k = np.arange(n)
    mat = np.exp(-2j * np.pi * np.outer(k, k) / n).astype(cdtype)
    _dft_matrix_cache[key] = mat
    return mat


def _validate_channel(x, name: str) -> np.ndarray:
    arr = np.asarray(x)
    if arr.dtype not in (np.float32, np.float64):
        arr = arr.astype(np.float64)
    if arr.shape[-1] < 1:
        raise ValidationError(f"{name}: need at least one sample")
    if not np.isfinite(arr).all():
        raise ValidationError(f"{name}: non-finite input")
    return arr


def _dft_complex(arr: np.ndarray) -> np.ndarray:
    """Full complex DFT over the last axis (fast or direct path)."""
    cdtype = _complex_dtype(arr.dtype)
    n = arr.shape[-1]
    if _is_pow2(n):
        return _fft_pow2(arr.astype(cdtype))
    return arr.astype(cdtype) @ _dft_matrix(n, cdtype).T


def dft_magnitude(channel) -> np.ndarray:
    """|DFT| over the last axis, no 1/N normalization.

    Power-of-two lengths take the radix-2 fast path; other lengths use
    the direct summation.
    """
    arr = _validate_channel(channel, "dft_magnitude")
    return np.abs(_dft_complex(arr)).astype(arr.dtype)


def dft_magnitude_direct(channel) -> np.ndarray:
    """|DFT| via the explicit O(N^2) sum, any length."""
    arr = _validate_channel(channel, "dft_magnitude_direct")
    cdtype = _complex_dtype(arr.dtype)
    spectrum = arr.astype(cdtype) @ _dft_matrix(arr.shape[-1], cdtype).T
    return np.abs(spectrum).astype(arr.dtype)


def dft_magnitude_backward(channel, upstream_grad) -> np.ndarray:
    """Adjoint of dft_magnitude: d(sum_k g_k |X_k|)/dx_n over the last axis.

    Uses d|X[k]|/dx[n] = Re(X[k] e^(2i pi kn/N)) / |X[k]|, realized as
    one inverse-direction transform of the phase-aligned upstream.
    """
    arr = _validate_channel(channel, "dft_magnitude_backward")
    grad = np.asarray(upstream_grad, dtype=arr.dtype)
    if grad.shape != arr.shape:
        raise ValidationError(
            f"dft_magnitude_backward: upstream shape {grad.shape} != input shape {arr.shape}"
        )
    if not np.isfinite(grad).all():
        raise ValidationError("dft_magnitude_backward: non-finite upstream gradient")
    spectrum = _dft_complex(arr)
    return _magnitude_adjoint(spectrum, grad).astype(arr.dtype)


def _magnitude_adjoint(spectrum: np.ndarray, grad: np.ndarray) -> np.ndarray:
    mag = np.abs(spectrum)
    unit = spectrum / np.maximum(mag, EPS_MAG)
    weighted = np.where(mag < EPS_MAG, 0, grad * unit)
    # sum_k w_k e^(+2i pi kn/N) = conj(DFT(conj(w))); only the real part survives
    n = weighted.shape[-1]
    if _is_pow2(n):
        back = _fft_pow2(np.conj(weighted))
    else:
        back = np.conj(weighted) @ _dft_matrix(n, weighted.dtype).T
    return back.real


@dataclass(frozen=True)
class FreqRecord:
    """Magnitude spectra of one record's I and Q channels."""

    i_mag: np.ndarray
    q_mag: np.ndarray
    label: int

    def __post_init__(self):
        for name in ("i_mag", "q_mag"):
            arr = np.asarray(getattr(self, name), dtype=np.float32)
            if arr.ndim != 1 or not np.isfinite(arr).all():
                raise ValidationError(f"{name}: must be 1-D and finite")
            if (arr < 0).any():
                raise ValidationError(f"{name}: magnitudes must be nonnegative")
            scale = float(arr.max()) if arr.size else 0.0
            if scale > 0 and not np.allclose(arr[1:], arr[1:][::-1], atol=1e-5 * scale):
                raise ValidationError(f"{name}: real-input DFT magnitudes must be symmetric")
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_samples(self) -> int:
        return self.i_mag.shape[0]


def to_frequency(record: SignalRecord) -> FreqRecord:
    """Transform both channels of a record independently."""
    return FreqRecord(
        i_mag=dft_magnitude(record.i_channel),
        q_mag=dft_magnitude(record.q_channel),
        label=record.label,
    )


def dft_magnitude_op(x: Tensor) -> Tensor:
    """dft_magnitude over the last axis as an autodiff graph node."""
    arr = x.data
    if arr.shape[-1] < 1:
        raise ValidationError("dft_magnitude_op: need at least one sample")
    spectrum = _dft_complex(arr)
    out = np.abs(spectrum).astype(arr.dtype)

    def _bw(g):
        if not x.requires_grad:
            return []
        return [(x, _magnitude_adjoint(spectrum, g).astype(arr.dtype))]

    return Tensor._from_op(out, (x,), _bw, "dft_magnitude")
