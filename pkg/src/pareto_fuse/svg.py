"""Deterministic static SVG charts (hand-rolled so bytes are reproducible)."""

from __future__ import annotations

FONT = 'font-family="monospace" font-size="11"'
PALETTE = ["#4878cf", "#d65f5f", "#6acc65", "#b47cc7", "#c4ad66", "#77bedb"]


def _fmt(x: float) -> str:
    return f"{x:.3f}"


def _header(width: int, height: int) -> str:
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
            f'height="{height}" viewBox="0 0 {width} {height}">\n'
            f'<rect width="{width}" height="{height}" fill="white"/>\n')


def grouped_bars(title: str, categories: list, series: dict,
                 y_range=(0.4, 1.0), width=720, height=320) -> str:
    """series: row label -> list of values aligned with categories."""
    left, right, top, bottom = 60, 20, 40, 60
    plot_w = width - left - right
    plot_h = height - top - bottom
    lo, hi = y_range
    n_cat = len(categories)
    n_ser = max(len(series), 1)
    group_w = plot_w / max(n_cat, 1)
    bar_w = group_w * 0.8 / n_ser

    def ypix(v):
        v = min(max(v, lo), hi)
        return top + plot_h * (1.0 - (v - lo) / (hi - lo))

    parts = [_header(width, height),
             f'<text x="{left}" y="20" {FONT}>{title}</text>\n']
    for k in range(5):
        v = lo + (hi - lo) * k / 4
        y = ypix(v)
        parts.append(f'<line x1="{left}" y1="{_fmt(y)}" x2="{width - right}" '
                     f'y2="{_fmt(y)}" stroke="#dddddd"/>\n')
        parts.append(f'<text x="8" y="{_fmt(y + 4)}" {FONT}>{_fmt(v)}</text>\n')
    for ci, cat in enumerate(categories):
        x0 = left + ci * group_w + group_w * 0.1
        for si, (label, values) in enumerate(series.items()):
            v = values[ci]
            y = ypix(v)
            h = top + plot_h - y
            color = PALETTE[si % len(PALETTE)]
            parts.append(f'<rect x="{_fmt(x0 + si * bar_w)}" y="{_fmt(y)}" '
                         f'width="{_fmt(bar_w)}" height="{_fmt(h)}" '
                         f'fill="{color}"/>\n')
        parts.append(f'<text x="{_fmt(left + ci * group_w + group_w / 2 - 12)}" '
                     f'y="{height - 40}" {FONT}>{cat}</text>\n')
    for si, label in enumerate(series):
        color = PALETTE[si % len(PALETTE)]
        x = left + si * 160
        parts.append(f'<rect x="{x}" y="{height - 24}" width="12" height="12" '
                     f'fill="{color}"/>\n')
        parts.append(f'<text x="{x + 16}" y="{height - 14}" {FONT}>{label}</text>\n')
    parts.append("</svg>\n")
    return "".join(parts)


def line_chart(title: str, x_values: list, series: dict,
               width=720, height=320) -> str:
    """series: label -> list of y values aligned with x_values."""
    left, right, top, bottom = 60, 20, 40, 60
    plot_w = width - left - right
    plot_h = height - top - bottom
    all_y = [y for values in series.values() for y in values] or [0.0, 1.0]
    lo, hi = min(all_y), max(all_y)
    if hi - lo < 1e-12:
        lo, hi = lo - 0.5, hi + 0.5
    n = max(len(x_values) - 1, 1)

    def xpix(i):
        return left + plot_w * i / n

    def ypix(v):
        return top + plot_h * (1.0 - (v - lo) / (hi - lo))

    parts = [_header(width, height),
             f'<text x="{left}" y="20" {FONT}>{title}</text>\n']
    for k in range(5):
        v = lo + (hi - lo) * k / 4
        y = ypix(v)
        parts.append(f'<line x1="{left}" y1="{_fmt(y)}" x2="{width - right}" '
                     f'y2="{_fmt(y)}" stroke="#dddddd"/>\n')
        parts.append(f'<text x="8" y="{_fmt(y + 4)}" {FONT}>{_fmt(v)}</text>\n')
    for si, (label, values) in enumerate(series.items()):
        color = PALETTE[si % len(PALETTE)]
        points = " ".join(f"{_fmt(xpix(i))},{_fmt(ypix(v))}"
                          for i, v in enumerate(values))
        parts.append(f'<polyline points="{points}" fill="none" '
                     f'stroke="{color}" stroke-width="1.5"/>\n')
        x = left + (si % 4) * 160
        y = height - 24 + 14 * (si // 4)
        parts.append(f'<rect x="{x}" y="{y}" width="12" height="4" fill="{color}"/>\n')
        parts.append(f'<text x="{x + 16}" y="{y + 6}" {FONT}>{label}</text>\n')
    parts.append("</svg>\n")
    return "".join(parts)


def table_chart(title: str, row_labels: list, col_labels: list,
                cells: list, width=520) -> str:
    """cells: list of rows of floats, rendered as a plain grid."""
    row_h, col_w, left, top = 22, 110, 140, 50
    height = top + row_h * (len(row_labels) + 1) + 20
    parts = [_header(width, height),
             f'<text x="20" y="24" {FONT}>{title}</text>\n']
    for ci, col in enumerate(col_labels):
        parts.append(f'<text x="{left + ci * col_w}" y="{top}" {FONT}>{col}</text>\n')
    for ri, row in enumerate(row_labels):
        y = top + row_h * (ri + 1)
        parts.append(f'<text x="20" y="{y}" {FONT}>{row}</text>\n')
        for ci, value in enumerate(cells[ri]):
            parts.append(f'<text x="{left + ci * col_w}" y="{y}" {FONT}>'
                         f'{value:.4f}</text>\n')
    parts.append("</svg>\n")
    return "".join(parts)
