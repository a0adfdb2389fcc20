"""Confidence-supplemented hypnogram rendering as standalone SVG.

The predicted hypnogram is drawn as a white step plot over one background
cell per epoch, colored on a linear green (confidence 1) to red
(confidence 0) scale.  An optional reference hypnogram is overlaid as a
blue step plot; epochs whose reference stage is Unknown get a gray cell.
Output bytes are deterministic for identical input.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core_data import UNKNOWN

# Hypnogram depth ordering, top to bottom.
Y_AXIS_ORDER = ("W", "REM", "N1", "N2", "N3")
_STAGE_ROW = {0: 0, 4: 1, 1: 2, 2: 3, 3: 4}  # stage code -> display row

MARGIN_LEFT = 48
MARGIN_RIGHT = 12
MARGIN_TOP = 16
MARGIN_BOTTOM = 28
UNKNOWN_FILL = "#9e9e9e"


@dataclass
class RenderSpec:
    recording_id: str
    predicted: np.ndarray  # (T,) stage codes
    tcp: np.ndarray  # (T,) confidence in [0, 1]
    reference: np.ndarray | None = None
    width: int = 1200
    height: int = 320

    def validate(self) -> None:
        T = len(self.predicted)
        if T == 0:
            raise ValueError("nothing to render: empty stage sequence")
        if len(self.tcp) != T:
            raise ValueError("confidence series length does not match stages")
        if self.reference is not None and len(self.reference) != T:
            raise ValueError("reference hypnogram length does not match stages")


def _cell_color(tcp: float) -> str:
    tcp = min(max(float(tcp), 0.0), 1.0)
    r = round(255 * (1.0 - tcp))
    g = round(255 * tcp)
    return f"#{r:02x}{g:02x}00"


def _step_path(stages, x0: float, cell_w: float, row_y) -> str:
    parts = []
    pen_down = False
    for t, code in enumerate(stages):
        code = int(code)
        if code == UNKNOWN:
            pen_down = False
            continue
        y = row_y(_STAGE_ROW[code])
        x_left = x0 + t * cell_w
        x_right = x_left + cell_w
        if not pen_down:
            parts.append(f"M {x_left:.2f} {y:.2f}")
            pen_down = True
        else:
            parts.append(f"L {x_left:.2f} {y:.2f}")
        parts.append(f"L {x_right:.2f} {y:.2f}")
    return " ".join(parts)


def render_confidence_hypnogram(spec: RenderSpec) -> bytes:
    """Render one recording; returns the SVG document as UTF-8 bytes."""
    spec.validate()
    T = len(spec.predicted)
    plot_w = spec.width - MARGIN_LEFT - MARGIN_RIGHT
    plot_h = spec.height - MARGIN_TOP - MARGIN_BOTTOM
    cell_w = plot_w / T
    row_h = plot_h / len(Y_AXIS_ORDER)

    def row_y(row: int) -> float:
        return MARGIN_TOP + (row + 0.5) * row_h

    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{spec.width}" '
        f'height="{spec.height}" viewBox="0 0 {spec.width} {spec.height}">',
        f'<rect x="0" y="0" width="{spec.width}" height="{spec.height}" fill="#202020"/>',
        f"<title>{spec.recording_id}</title>",
    ]
    for t in range(T):
        if spec.reference is not None and int(spec.reference[t]) == UNKNOWN:
            fill = UNKNOWN_FILL
        else:
            fill = _cell_color(spec.tcp[t])
        x = MARGIN_LEFT + t * cell_w
        lines.append(
            f'<rect x="{x:.2f}" y="{MARGIN_TOP}" width="{cell_w:.2f}" '
            f'height="{plot_h:.2f}" fill="{fill}"/>'
        )
    for row, name in enumerate(Y_AXIS_ORDER):
        lines.append(
            f'<text x="{MARGIN_LEFT - 6}" y="{row_y(row) + 4:.2f}" fill="#ffffff" '
            f'font-family="monospace" font-size="12" text-anchor="end">{name}</text>'
        )
    if spec.reference is not None:
        ref_path = _step_path(spec.reference, MARGIN_LEFT, cell_w, row_y)
        if ref_path:
            lines.append(
                f'<path d="{ref_path}" fill="none" stroke="#1e6fd9" stroke-width="3"/>'
            )
    pred_path = _step_path(spec.predicted, MARGIN_LEFT, cell_w, row_y)
    lines.append(f'<path d="{pred_path}" fill="none" stroke="#ffffff" stroke-width="1.5"/>')
    caption = f"{spec.recording_id}: predicted hypnogram (white)"
    if spec.reference is not None:
        caption += ", reference (blue)"
    caption += "; background green=confident, red=uncertain"
    lines.append(
        f'<text x="{MARGIN_LEFT}" y="{spec.height - 8}" fill="#ffffff" '
        f'font-family="monospace" font-size="11">{caption}</text>'
    )
    lines.append("</svg>")
    return ("\n".join(lines) + "\n").encode("utf-8")
