"""Minimal deterministic SVG bar charts for ``--plot`` outputs."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape


def bar_chart(labels, values, title="", ylabel="", log_scale=False, width=640, height=360) -> str:
    """Vertical bars; ``None`` values leave an empty slot. Output depends only on the inputs."""
    left, right, top, bottom = 60, 20, 36, 70
    plot_w, plot_h = width - left - right, height - top - bottom
    shown = [(math.log10(v) if log_scale and v > 0 else (0.0 if log_scale else v)) if v is not None else None for v in values]
    peak = max([v for v in shown if v is not None] + [0.0]) or 1.0
    slot = plot_w / max(len(labels), 1)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-family="sans-serif" font-size="14">{escape(title)}</text>',
        f'<line x1="{left}" y1="{top + plot_h}" x2="{left + plot_w}" y2="{top + plot_h}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + plot_h}" stroke="black"/>',
        f'<text x="14" y="{top + plot_h / 2:.1f}" transform="rotate(-90 14 {top + plot_h / 2:.1f})" '
        f'text-anchor="middle" font-family="sans-serif" font-size="11">{escape(ylabel)}</text>',
        f'<text x="{left - 4}" y="{top + 4}" text-anchor="end" font-family="sans-serif" font-size="10">{peak:.4g}</text>',
    ]
    for i, (label, v) in enumerate(zip(labels, shown)):
        x = left + i * slot
        if v is not None:
            bar_h = plot_h * v / peak
            out.append(
                f'<rect x="{x + slot * 0.1:.2f}" y="{top + plot_h - bar_h:.2f}" width="{slot * 0.8:.2f}" '
                f'height="{bar_h:.2f}" fill="#4c72b0"/>'
            )
        cx, cy = x + slot / 2, top + plot_h + 12
        out.append(
            f'<text x="{cx:.2f}" y="{cy:.2f}" transform="rotate(45 {cx:.2f} {cy:.2f})" '
            f'font-family="sans-serif" font-size="10">{escape(str(label))}</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"
