"""Minimal deterministic SVG emission for the report charts.

Pure formatting: every number shown here is computed elsewhere and passed in.
Output is plain text with fixed float formatting so reruns are byte-identical
and tests can assert annotations by string search.
"""

from __future__ import annotations

import math

import numpy as np

from .validation import AgreementStats, ConfusionMatrix2, format_stat

WIDTH = 640
HEIGHT = 480
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 72, 180, 44, 56
CONFUSION_CAPTION = "1 - Material does not exist, 2 - Material exist"


def _c(v: float) -> str:
    return f"{v:.2f}"


class _Scale:
    def __init__(self, lo: float, hi: float, out_lo: float, out_hi: float):
        if not (math.isfinite(lo) and math.isfinite(hi)):
            lo, hi = 0.0, 1.0
        if hi <= lo:
            hi = lo + 1.0
        pad = 0.05 * (hi - lo)
        self.lo, self.hi = lo - pad, hi + pad
        self.out_lo, self.out_hi = out_lo, out_hi

    def __call__(self, v: float) -> float:
        t = (v - self.lo) / (self.hi - self.lo)
        return self.out_lo + t * (self.out_hi - self.out_lo)

    def ticks(self, n: int = 5) -> list[float]:
        return [self.lo + i * (self.hi - self.lo) / (n - 1) for i in range(n)]


def _document(body: list[str], meta_comment: str = "") -> str:
    head = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" '
            f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">']
    if meta_comment:
        head.insert(0, f"<!-- {meta_comment} -->")
    head.insert(0, '<?xml version="1.0" encoding="UTF-8"?>')
    return "\n".join(head + body + ["</svg>"]) + "\n"


def _axes(xs: _Scale, ys: _Scale, xlabel: str, ylabel: str, title: str) -> list[str]:
    x0, x1 = MARGIN_L, WIDTH - MARGIN_R
    y0, y1 = HEIGHT - MARGIN_B, MARGIN_T
    parts = [
        f'<rect x="{x0}" y="{y1}" width="{x1 - x0}" height="{y0 - y1}" '
        'fill="white" stroke="#444"/>',
        f'<text x="{(x0 + x1) / 2:.1f}" y="24" text-anchor="middle" '
        f'font-family="sans-serif" font-size="15">{title}</text>',
        f'<text x="{(x0 + x1) / 2:.1f}" y="{HEIGHT - 12}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12">{xlabel}</text>',
        f'<text x="18" y="{(y0 + y1) / 2:.1f}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 18 {(y0 + y1) / 2:.1f})">{ylabel}</text>',
    ]
    for t in xs.ticks():
        px = xs(t)
        parts.append(f'<line x1="{_c(px)}" y1="{y0}" x2="{_c(px)}" y2="{y0 + 5}" '
                     'stroke="#444"/>')
        parts.append(f'<text x="{_c(px)}" y="{y0 + 18}" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="10">{t:.3g}</text>')
    for t in ys.ticks():
        py = ys(t)
        parts.append(f'<line x1="{x0 - 5}" y1="{_c(py)}" x2="{x0}" y2="{_c(py)}" '
                     'stroke="#444"/>')
        parts.append(f'<text x="{x0 - 8}" y="{_c(py + 3)}" text-anchor="end" '
                     f'font-family="sans-serif" font-size="10">{t:.3g}</text>')
    return parts


def _annotation_block(lines: list[str]) -> list[str]:
    x = WIDTH - MARGIN_R + 12
    parts = []
    for i, line in enumerate(lines):
        parts.append(f'<text x="{x}" y="{MARGIN_T + 14 + 15 * i}" '
                     f'font-family="monospace" font-size="11">{line}</text>')
    return parts


def stats_annotation(stats: AgreementStats) -> list[str]:
    """The seven report items as annotation lines."""
    return [
        f"eq: y = {format_stat(stats.slope)}x + {format_stat(stats.intercept)}",
        f"r: {format_stat(stats.r)}",
        f"RMSE: {format_stat(stats.rmse)}",
        f"p: {format_stat(stats.p)}",
        f"n: {stats.n}",
        f"RPC: {format_stat(stats.rpc)}",
        f"CV: {format_stat(stats.cv_percent)}%",
        f"bias: {format_stat(stats.bias)}",
    ]


def bland_altman_svg(stats: AgreementStats, title: str, meta: str = "") -> str:
    pairs = np.asarray(stats.ba_pairs)
    means, diffs = pairs[:, 0], pairs[:, 1]
    hi = max(float(np.max(np.abs(diffs))), stats.rpc, 1e-9)
    xs = _Scale(float(np.min(means)), float(np.max(means)),
                MARGIN_L, WIDTH - MARGIN_R)
    ys = _Scale(min(float(np.min(diffs)), stats.bias - 1.2 * hi),
                max(float(np.max(diffs)), stats.bias + 1.2 * hi),
                HEIGHT - MARGIN_B, MARGIN_T)
    body = _axes(xs, ys, "pair average (lab + pred)/2", "difference lab - pred", title)
    for level, color in ((stats.bias, "#777"),
                         (stats.bias + stats.rpc, "#c44"),
                         (stats.bias - stats.rpc, "#c44")):
        py = ys(level)
        body.append(f'<line x1="{MARGIN_L}" y1="{_c(py)}" x2="{WIDTH - MARGIN_R}" '
                    f'y2="{_c(py)}" stroke="{color}" stroke-dasharray="6,4"/>')
    for mx, dy in zip(means, diffs):
        body.append(f'<circle cx="{_c(xs(mx))}" cy="{_c(ys(dy))}" r="2.4" '
                    'fill="#2266aa" fill-opacity="0.6"/>')
    body.extend(_annotation_block(stats_annotation(stats)))
    return _document(body, meta)


def histogram_svg(values, bins: int, title: str, xlabel: str, meta: str = "") -> str:
    v = np.asarray(values, dtype=float)
    counts, edges = np.histogram(v, bins=bins)
    xs = _Scale(float(edges[0]), float(edges[-1]), MARGIN_L, WIDTH - MARGIN_R)
    ys = _Scale(0.0, float(np.max(counts)) if counts.size else 1.0,
                HEIGHT - MARGIN_B, MARGIN_T)
    body = _axes(xs, ys, xlabel, "count", title)
    base = ys(0.0)
    for count, lo, hi in zip(counts, edges[:-1], edges[1:]):
        top = ys(float(count))
        body.append(f'<rect x="{_c(xs(lo))}" y="{_c(top)}" '
                    f'width="{_c(max(xs(hi) - xs(lo) - 1, 1))}" '
                    f'height="{_c(max(base - top, 0))}" fill="#2266aa" '
                    'fill-opacity="0.7" stroke="#113355"/>')
    sd = format_stat(float(np.std(v, ddof=1))) if v.size > 1 else "NaN"
    body.extend(_annotation_block([f"n: {v.size}",
                                   f"mean: {format_stat(float(np.mean(v)))}",
                                   f"sd: {sd}"]))
    return _document(body, meta)


def residuals_by_grade_svg(residuals, grades, title: str, meta: str = "") -> str:
    """Residual strip per iron grade class, with per-class mean markers."""
    order = ("waste", "med", "high")
    res = np.asarray(residuals, dtype=float)
    xs = _Scale(-0.5, 2.5, MARGIN_L, WIDTH - MARGIN_R)
    lo = float(np.min(res)) if res.size else -1.0
    hi = float(np.max(res)) if res.size else 1.0
    ys = _Scale(lo, hi, HEIGHT - MARGIN_B, MARGIN_T)
    body = _axes(xs, ys, "iron grade class", "residual lab - pred", title)
    ann = []
    for gi, grade in enumerate(order):
        mask = np.array([g == grade for g in grades])
        sub = res[mask]
        body.append(f'<text x="{_c(xs(gi))}" y="{HEIGHT - MARGIN_B + 32}" '
                    f'text-anchor="middle" font-family="sans-serif" '
                    f'font-size="11">{grade}</text>')
        for k, val in enumerate(sub):
            dx = (k % 7 - 3) * 0.04  # deterministic fan-out, no jitter RNG
            body.append(f'<circle cx="{_c(xs(gi + dx))}" cy="{_c(ys(float(val)))}" '
                        'r="2" fill="#2266aa" fill-opacity="0.5"/>')
        if sub.size:
            m = float(np.mean(sub))
            body.append(f'<line x1="{_c(xs(gi - 0.18))}" y1="{_c(ys(m))}" '
                        f'x2="{_c(xs(gi + 0.18))}" y2="{_c(ys(m))}" '
                        'stroke="#c44" stroke-width="2"/>')
            ann.append(f"{grade}: n={sub.size} mean={format_stat(m)}")
        else:
            ann.append(f"{grade}: n=0")
    body.extend(_annotation_block(ann))
    return _document(body, meta)


def qq_svg(points, title: str, xlabel: str, ylabel: str, meta: str = "") -> str:
    pts = np.asarray(points, dtype=float)
    lo = float(min(pts[:, 0].min(), pts[:, 1].min()))
    hi = float(max(pts[:, 0].max(), pts[:, 1].max()))
    xs = _Scale(lo, hi, MARGIN_L, WIDTH - MARGIN_R)
    ys = _Scale(lo, hi, HEIGHT - MARGIN_B, MARGIN_T)
    body = _axes(xs, ys, xlabel, ylabel, title)
    body.append(f'<line x1="{_c(xs(lo))}" y1="{_c(ys(lo))}" x2="{_c(xs(hi))}" '
                f'y2="{_c(ys(hi))}" stroke="#888" stroke-dasharray="5,4"/>')
    for qx, qy in pts:
        body.append(f'<circle cx="{_c(xs(float(qx)))}" cy="{_c(ys(float(qy)))}" '
                    'r="2.2" fill="#2266aa" fill-opacity="0.6"/>')
    body.extend(_annotation_block([f"n: {len(pts)}"]))
    return _document(body, meta)


def confusion_svg(matrix: ConfusionMatrix2, title: str, meta: str = "") -> str:
    """2x2 confusion grid; axis classes follow the caption convention below."""
    x0, y0 = 180, 110
    cell = 130
    total = max(matrix.n, 1)
    body = [
        f'<text x="{WIDTH / 2:.1f}" y="40" text-anchor="middle" '
        f'font-family="sans-serif" font-size="15">{title}</text>',
        f'<text x="{WIDTH / 2:.1f}" y="62" text-anchor="middle" '
        f'font-family="sans-serif" font-size="11">{CONFUSION_CAPTION}</text>',
    ]
    cells = [(0, 0, matrix.tn, "true 1 / predicted 1"),
             (1, 0, matrix.fp, "true 1 / predicted 2"),
             (0, 1, matrix.fn, "true 2 / predicted 1"),
             (1, 1, matrix.tp, "true 2 / predicted 2")]
    for cx, cy, count, label in cells:
        px, py = x0 + cx * cell, y0 + cy * cell
        shade = 235 - int(170 * count / total)
        body.append(f'<rect x="{px}" y="{py}" width="{cell}" height="{cell}" '
                    f'fill="rgb({shade},{shade},245)" stroke="#333"/>')
        body.append(f'<text x="{px + cell / 2:.1f}" y="{py + cell / 2 - 4:.1f}" '
                    f'text-anchor="middle" font-family="sans-serif" '
                    f'font-size="22">{count}</text>')
        body.append(f'<text x="{px + cell / 2:.1f}" y="{py + cell / 2 + 18:.1f}" '
                    f'text-anchor="middle" font-family="sans-serif" '
                    f'font-size="9">{label}</text>')
    for i, name in enumerate(("1", "2")):
        body.append(f'<text x="{x0 + i * cell + cell / 2:.1f}" y="{y0 - 10}" '
                    f'text-anchor="middle" font-family="sans-serif" '
                    f'font-size="12">predicted {name}</text>')
        body.append(f'<text x="{x0 - 14}" y="{y0 + i * cell + cell / 2:.1f}" '
                    f'text-anchor="end" font-family="sans-serif" '
                    f'font-size="12">true {name}</text>')
    body.append(f'<text x="{x0}" y="{y0 + 2 * cell + 36}" '
                f'font-family="monospace" font-size="12">'
                f'accuracy: {format_stat(matrix.accuracy)} (n={matrix.n})</text>')
    return _document(body, meta)
