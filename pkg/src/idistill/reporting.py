"""Report rendering: DET curve as standalone SVG and a text summary table.

The SVG is built by string assembly with fixed float formatting so that
identical reports always produce identical bytes.
"""

from __future__ import annotations

from pathlib import Path

from .metrics import EvalReport

_W = _H = 480
_M = 56  # margin around the plot area


def _px(a: float, b: float) -> tuple[float, float]:
    x = _M + a * (_W - 2 * _M)
    y = _H - _M - b * (_H - 2 * _M)
    return x, y


def det_svg(report: EvalReport) -> str:
    """DET trade-off (APCER on x, BPCER on y) with the EER point marked."""
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
    ]
    x0, y0 = _px(0.0, 0.0)
    x1, y1 = _px(1.0, 1.0)
    parts.append(
        f'<rect x="{x0:.1f}" y="{y1:.1f}" width="{x1 - x0:.1f}" height="{y0 - y1:.1f}" '
        f'fill="none" stroke="black"/>'
    )
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        tx, ty = _px(frac, 0.0)
        parts.append(
            f'<text x="{tx:.1f}" y="{y0 + 18:.1f}" font-size="11" '
            f'text-anchor="middle">{frac:.2f}</text>'
        )
        tx, ty = _px(0.0, frac)
        parts.append(
            f'<text x="{x0 - 8:.1f}" y="{ty + 4:.1f}" font-size="11" '
            f'text-anchor="end">{frac:.2f}</text>'
        )
    parts.append(
        f'<text x="{(_W / 2):.1f}" y="{_H - 12}" font-size="13" '
        f'text-anchor="middle">APCER</text>'
    )
    parts.append(
        f'<text x="16" y="{(_H / 2):.1f}" font-size="13" text-anchor="middle" '
        f'transform="rotate(-90 16 {(_H / 2):.1f})">BPCER</text>'
    )
    # chance diagonal
    dx0, dy0 = _px(0.0, 1.0)
    dx1, dy1 = _px(1.0, 0.0)
    parts.append(
        f'<line x1="{dx0:.1f}" y1="{dy0:.1f}" x2="{dx1:.1f}" y2="{dy1:.1f}" '
        f'stroke="#bbbbbb" stroke-dasharray="4 4"/>'
    )
    pts = sorted(report.det_points)
    coords = " ".join(f"{x:.2f},{y:.2f}" for x, y in (_px(a, b) for a, b in pts))
    parts.append(f'<polyline points="{coords}" fill="none" stroke="#c0392b" stroke-width="2"/>')
    ex, ey = _px(report.eer, report.eer)
    parts.append(f'<circle cx="{ex:.2f}" cy="{ey:.2f}" r="4" fill="#2c3e50"/>')
    parts.append(
        f'<text x="{ex + 8:.1f}" y="{ey - 8:.1f}" font-size="12">EER={report.eer * 100:.2f}%</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def save_det_svg(report: EvalReport, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(det_svg(report), encoding="utf-8")
    return path


def summary_table(report: EvalReport, name: str = "model") -> str:
    """One-row results table; rates in percent."""
    b01 = report.bpcer_at_apcer.get(0.01)
    b20 = report.bpcer_at_apcer.get(0.20)
    head = f"{'Model':<20} {'EER':>8} {'BPCER@APCER=1%':>16} {'BPCER@APCER=20%':>17}"
    fmt = lambda v: "n/a" if v is None else f"{v * 100:.2f}%"
    row = f"{name:<20} {fmt(report.eer):>8} {fmt(b01):>16} {fmt(b20):>17}"
    return head + "\n" + row + "\n"
