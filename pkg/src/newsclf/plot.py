"""Loss-curve SVG rendering for step traces.

The chart is emitted as plain text: one ``<polyline>`` for loss against
step, axis lines, min/max loss labels, and a tick at the first step of
every epoch after the first. Coordinates are printed with two decimals so
the output bytes depend only on the trace.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence, Union

from src.newsclf.errors import TraceFormatError
from src.newsclf.training.trace import StepRecord, read_step_trace

WIDTH = 640
HEIGHT = 400
MARGIN_LEFT = 70
MARGIN_RIGHT = 20
MARGIN_TOP = 20
MARGIN_BOTTOM = 50
TICK = 6


def _fmt(value: float) -> str:
    return f"{value:.2f}"


def render_loss_svg(records: Sequence[StepRecord], title: str = "training loss") -> str:
    if not records:
        raise TraceFormatError("trace has no steps to plot")
    left, right = MARGIN_LEFT, WIDTH - MARGIN_RIGHT
    top, bottom = MARGIN_TOP, HEIGHT - MARGIN_BOTTOM
    losses = [r.loss for r in records]
    lo, hi = min(losses), max(losses)
    span = hi - lo
    count = len(records)

    def x_at(i: int) -> float:
        return left + (right - left) * (i / (count - 1) if count > 1 else 0.5)

    def y_at(loss: float) -> float:
        return bottom - (bottom - top) * ((loss - lo) / span if span > 0 else 0.5)

    points = " ".join(f"{_fmt(x_at(i))},{_fmt(y_at(r.loss))}" for i, r in enumerate(records))

    ticks: list[str] = []
    for i in range(1, count):
        if records[i].epoch != records[i - 1].epoch:
            x = _fmt(x_at(i))
            ticks.append(
                f'<line class="epoch" x1="{x}" y1="{bottom}" x2="{x}" y2="{bottom + TICK}" stroke="#555"/>'
            )
            ticks.append(
                f'<text x="{x}" y="{bottom + TICK + 12}" font-size="10" text-anchor="middle">'
                f"e{records[i].epoch}</text>"
            )

    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f"<title>{title}</title>",
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<line x1="{left}" y1="{bottom}" x2="{right}" y2="{bottom}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{bottom}" stroke="black"/>',
        f'<text x="{left - 8}" y="{_fmt(y_at(hi) + 4)}" font-size="10" text-anchor="end">{hi:.4g}</text>',
        f'<text x="{left - 8}" y="{_fmt(y_at(lo) + 4)}" font-size="10" text-anchor="end">{lo:.4g}</text>',
        f'<text x="{(left + right) // 2}" y="{HEIGHT - 10}" font-size="12" text-anchor="middle">step</text>',
        f'<text x="14" y="{(top + bottom) // 2}" font-size="12" text-anchor="middle" '
        f'transform="rotate(-90 14 {(top + bottom) // 2})">loss</text>',
        *ticks,
        f'<polyline fill="none" stroke="#1f77b4" stroke-width="1.5" points="{points}"/>',
        "</svg>",
    ]
    return "\n".join(lines) + "\n"


def plot_trace(trace_path: Union[str, Path], out_path: Union[str, Path]) -> Path:
    """Read a step trace CSV and write its loss curve to *out_path*."""
    records = read_step_trace(trace_path)
    svg = render_loss_svg(records, title=f"training loss: {Path(trace_path).name}")
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(svg, encoding="utf-8")
    return out
