"""Minimal self-contained SVG rendering for scenario outputs.

Hand-rolled on purpose: plots are emitted as standalone files directly from
CSV data without any plotting runtime. Only what the scenario reports need:
a population heatmap and line plots with optional log axes.
"""

from __future__ import annotations

import numpy as np

_WIDTH, _HEIGHT = 640, 420
_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 70, 110, 40, 55

# Compact perceptual colormap: anchors sampled from a dark-blue -> green ->
# yellow ramp, linearly interpolated.
_CMAP = np.array([
    (68, 1, 84), (59, 82, 139), (33, 145, 140), (94, 201, 98), (253, 231, 37),
], dtype=float)

_LINE_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _color(value: float) -> str:
    x = min(max(value, 0.0), 1.0) * (len(_CMAP) - 1)
    i = min(int(x), len(_CMAP) - 2)
    frac = x - i
    rgb = (1 - frac) * _CMAP[i] + frac * _CMAP[i + 1]
    return "#%02x%02x%02x" % tuple(int(round(c)) for c in rgb)


def _fmt(x: float) -> str:
    return f"{x:.4g}"


def _nice_ticks(lo: float, hi: float, target: int = 5) -> list[float]:
    if not hi > lo:
        return [lo]
    raw = (hi - lo) / target
    mag = 10.0 ** np.floor(np.log10(raw))
    for mult in (1.0, 2.0, 5.0, 10.0):
        if raw <= mult * mag:
            step = mult * mag
            break
    first = np.ceil(lo / step) * step
    return [t for t in np.arange(first, hi + 0.5 * step, step)]


def _log_ticks(lo: float, hi: float) -> list[float]:
    lo_e = int(np.floor(np.log10(lo)))
    hi_e = int(np.ceil(np.log10(hi)))
    ticks = [10.0 ** e for e in range(lo_e, hi_e + 1)]
    return [t for t in ticks if lo <= t <= hi] or [lo, hi]


class _Frame:
    """Maps data coordinates onto the plot rectangle."""

    def __init__(self, xlim, ylim, logx=False, logy=False):
        self.logx, self.logy = logx, logy
        self.x0, self.x1 = (np.log10(xlim) if logx else np.asarray(xlim, float))
        self.y0, self.y1 = (np.log10(ylim) if logy else np.asarray(ylim, float))
        if self.x1 == self.x0:
            self.x1 = self.x0 + 1.0
        if self.y1 == self.y0:
            self.y1 = self.y0 + 1.0
        self.px0, self.px1 = _MARGIN_L, _WIDTH - _MARGIN_R
        self.py0, self.py1 = _HEIGHT - _MARGIN_B, _MARGIN_T

    def x(self, v):
        v = np.log10(v) if self.logx else v
        return self.px0 + (v - self.x0) / (self.x1 - self.x0) * (self.px1 - self.px0)

    def y(self, v):
        v = np.log10(v) if self.logy else v
        return self.py0 + (v - self.y0) / (self.y1 - self.y0) * (self.py1 - self.py0)


def _axes(frame: _Frame, xticks, yticks, xlabel: str, ylabel: str, title: str) -> list[str]:
    parts = [
        f'<rect x="{frame.px0}" y="{frame.py1}" width="{frame.px1 - frame.px0}" '
        f'height="{frame.py0 - frame.py1}" fill="none" stroke="black"/>',
        f'<text x="{(frame.px0 + frame.px1) / 2:.1f}" y="{_HEIGHT - 12}" '
        f'text-anchor="middle" font-size="13">{xlabel}</text>',
        f'<text x="16" y="{(frame.py0 + frame.py1) / 2:.1f}" text-anchor="middle" '
        f'font-size="13" transform="rotate(-90 16 {(frame.py0 + frame.py1) / 2:.1f})">{ylabel}</text>',
        f'<text x="{(frame.px0 + frame.px1) / 2:.1f}" y="24" text-anchor="middle" '
        f'font-size="14">{title}</text>',
    ]
    for t in xticks:
        px = frame.x(t)
        parts.append(f'<line x1="{px:.1f}" y1="{frame.py0}" x2="{px:.1f}" '
                     f'y2="{frame.py0 + 4}" stroke="black"/>')
        parts.append(f'<text x="{px:.1f}" y="{frame.py0 + 17}" text-anchor="middle" '
                     f'font-size="11">{_fmt(t)}</text>')
    for t in yticks:
        py = frame.y(t)
        parts.append(f'<line x1="{frame.px0 - 4}" y1="{py:.1f}" x2="{frame.px0}" '
                     f'y2="{py:.1f}" stroke="black"/>')
        parts.append(f'<text x="{frame.px0 - 7}" y="{py + 4:.1f}" text-anchor="end" '
                     f'font-size="11">{_fmt(t)}</text>')
    return parts


def _document(body: list[str]) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" '
            f'viewBox="0 0 {_WIDTH} {_HEIGHT}" font-family="sans-serif">')
    return "\n".join([head, f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>']
                     + body + ["</svg>"]) + "\n"


def population_heatmap_svg(times: np.ndarray, populations: np.ndarray,
                           title: str = "", xlabel: str = "t") -> str:
    """Site-by-time heatmap of populations, colored on [0, max]."""
    times = np.asarray(times, float)
    pops = np.asarray(populations, float)
    n_t, n_sites = pops.shape
    frame = _Frame((times[0], times[-1]), (-0.5, n_sites - 0.5))
    vmax = max(pops.max(), 1e-12)
    body = []
    edges = np.empty(n_t + 1)
    edges[1:-1] = 0.5 * (times[1:] + times[:-1])
    edges[0], edges[-1] = times[0], times[-1]
    for k in range(n_t):
        x_l, x_r = frame.x(edges[k]), frame.x(edges[k + 1])
        for m in range(n_sites):
            y_t, y_b = frame.y(m + 0.5), frame.y(m - 0.5)
            body.append(
                f'<rect x="{x_l:.2f}" y="{y_t:.2f}" width="{x_r - x_l:.2f}" '
                f'height="{y_b - y_t:.2f}" fill="{_color(pops[k, m] / vmax)}"/>'
            )
    yticks = [m for m in range(n_sites) if n_sites <= 12 or m % max(1, n_sites // 8) == 0]
    body += _axes(frame, _nice_ticks(times[0], times[-1]), yticks, xlabel, "site", title)
    body.append(f'<text x="{_WIDTH - _MARGIN_R + 8}" y="{_MARGIN_T + 10}" font-size="11">'
                f'n max = {_fmt(vmax)}</text>')
    return _document(body)


def line_plot_svg(x: np.ndarray, curves: list[tuple[str, np.ndarray]], xlabel: str,
                  ylabel: str, title: str = "", logx: bool = False,
                  logy: bool = False) -> str:
    """Polyline plot of one or more named curves with optional log axes.

    Nonpositive points are dropped on log axes; curves with no plottable
    points are skipped.
    """
    x = np.asarray(x, float)
    cleaned = []
    for label, y in curves:
        y = np.asarray(y, float)
        mask = np.isfinite(x) & np.isfinite(y)
        if logx:
            mask &= x > 0
        if logy:
            mask &= y > 0
        if mask.any():
            cleaned.append((label, x[mask], y[mask]))
    if not cleaned:
        return _document([f'<text x="{_WIDTH / 2}" y="{_HEIGHT / 2}" text-anchor="middle">'
                          f'no plottable data</text>'])
    all_x = np.concatenate([c[1] for c in cleaned])
    all_y = np.concatenate([c[2] for c in cleaned])
    frame = _Frame((all_x.min(), all_x.max()), (all_y.min(), all_y.max()),
                   logx=logx, logy=logy)
    xticks = _log_ticks(all_x.min(), all_x.max()) if logx else _nice_ticks(all_x.min(), all_x.max())
    yticks = _log_ticks(all_y.min(), all_y.max()) if logy else _nice_ticks(all_y.min(), all_y.max())
    body = _axes(frame, xticks, yticks, xlabel, ylabel, title)
    for idx, (label, cx, cy) in enumerate(cleaned):
        color = _LINE_COLORS[idx % len(_LINE_COLORS)]
        points = " ".join(f"{frame.x(a):.2f},{frame.y(b):.2f}" for a, b in zip(cx, cy))
        body.append(f'<polyline points="{points}" fill="none" stroke="{color}" '
                    f'stroke-width="1.5"/>')
        ly = _MARGIN_T + 14 + 16 * idx
        body.append(f'<line x1="{_WIDTH - _MARGIN_R + 8}" y1="{ly - 4}" '
                    f'x2="{_WIDTH - _MARGIN_R + 28}" y2="{ly - 4}" stroke="{color}" '
                    f'stroke-width="2"/>')
        body.append(f'<text x="{_WIDTH - _MARGIN_R + 32}" y="{ly}" font-size="11">{label}</text>')
    return _document(body)
