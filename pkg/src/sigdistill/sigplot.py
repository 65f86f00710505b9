"""Self-contained SVG figures: per record, four panels showing the I and
Q waveforms next to their DFT magnitude spectra. Output is plain text
with fixed float formatting, so identical inputs give identical files."""

from __future__ import annotations

import numpy as np

from .dataio import SignalRecord
from .spectral import to_frequency

PANEL_W = 220
PANEL_H = 110
PAD_X = 14
PAD_TOP = 34
ROW_LABEL_W = 90

_TITLES = ("I(n)", "Q(n)", "|I(k)|", "|Q(k)|")


def _polyline(values: np.ndarray, x0: float, y0: float) -> str:
    lo = float(values.min())
    hi = float(values.max())
    span = (hi - lo) or 1.0
    n = len(values)
    denom = (n - 1) or 1
    points = " ".join(
        f"{x0 + PANEL_W * i / denom:.2f},{y0 + PANEL_H - PANEL_H * (float(v) - lo) / span:.2f}"
        for i, v in enumerate(values)
    )
    return f'<polyline fill="none" stroke="#1f77b4" stroke-width="1" points="{points}"/>'


def _panel(values: np.ndarray, x0: float, y0: float) -> list[str]:
    frame = (
        f'<rect x="{x0:.2f}" y="{y0:.2f}" width="{PANEL_W}" height="{PANEL_H}" '
        'fill="white" stroke="#888" stroke-width="0.5"/>'
    )
    return [frame, _polyline(values, x0, y0)]


def record_rows(label: str, records: list[SignalRecord]) -> list[tuple[str, list[np.ndarray]]]:
    rows = []
    for i, rec in enumerate(records):
        freq = to_frequency(rec)
        rows.append(
            (f"{label} #{i}", [rec.i_channel, rec.q_channel, freq.i_mag, freq.q_mag])
        )
    return rows


def render_figure(title: str, rows: list[tuple[str, list[np.ndarray]]]) -> str:
    width = ROW_LABEL_W + 4 * (PANEL_W + PAD_X) + PAD_X
    height = PAD_TOP + len(rows) * (PANEL_H + PAD_X) + PAD_X
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<text x="{ROW_LABEL_W}" y="16" font-family="monospace" font-size="13">{title}</text>',
    ]
    for col, name in enumerate(_TITLES):
        x0 = ROW_LABEL_W + col * (PANEL_W + PAD_X)
        parts.append(
            f'<text x="{x0:.2f}" y="{PAD_TOP - 6}" font-family="monospace" font-size="11">{name}</text>'
        )
    for r, (row_label, series) in enumerate(rows):
        y0 = PAD_TOP + r * (PANEL_H + PAD_X)
        parts.append(
            f'<text x="4" y="{y0 + PANEL_H / 2:.2f}" font-family="monospace" font-size="10">'
            f"{row_label}</text>"
        )
        for col, values in enumerate(series):
            x0 = ROW_LABEL_W + col * (PANEL_W + PAD_X)
            parts.extend(_panel(np.asarray(values), x0, y0))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
