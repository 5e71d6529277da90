"""Dependency-free SVG line plot of agent outputs against the reference."""

import numpy as np

WIDTH, HEIGHT = 800, 480
MARGIN = dict(left=70, right=170, top=30, bottom=50)
PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
           "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


def _ticks(lo, hi, count=6):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / count
    mag = 10 ** np.floor(np.log10(raw))
    step = mag * min((1, 2, 5, 10), key=lambda s: abs(s * mag - raw))
    start = np.ceil(lo / step) * step
    vals = np.arange(start, hi + step * 1e-9, step)
    return [float(v) + 0.0 for v in np.round(vals, 12)]


def _fmt(v):
    return f"{v:.6g}"


def emit_plot(traj, title="Agent outputs", max_points=2000, channel=0):
    """SVG text with one polyline per agent output (channel ``channel``) and
    one dashed polyline for the reference. Output is byte-stable."""
    t = np.asarray(traj.times, dtype=float)
    if t.size == 0:
        raise ValueError("empty trajectory")
    stride = max(1, int(np.ceil(t.size / max_points)))
    idx = np.arange(0, t.size, stride)
    if idx[-1] != t.size - 1:
        idx = np.append(idx, t.size - 1)
    ys = [traj.y[idx, i, channel] for i in range(traj.N)]
    y0 = traj.y0[idx, channel]
    allv = np.concatenate(ys + [y0])
    lo, hi = float(np.min(allv)), float(np.max(allv))
    pad = 0.05 * (hi - lo) if hi > lo else 0.5
    lo, hi = lo - pad, hi + pad
    t0, t1 = float(t[0]), float(t[-1]) if t[-1] > t[0] else float(t[0]) + 1.0
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def sx(v):
        return MARGIN["left"] + (v - t0) / (t1 - t0) * pw

    def sy(v):
        return MARGIN["top"] + (hi - v) / (hi - lo) * ph

    def points(yv):
        return " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(t[idx], yv))

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
           f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
           f'<text x="{MARGIN["left"] + pw / 2:.2f}" y="18" text-anchor="middle">{title}</text>',
           f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{pw}" height="{ph}" '
           f'fill="none" stroke="black"/>']
    for v in _ticks(t0, t1):
        x = sx(v)
        out.append(f'<line x1="{x:.2f}" y1="{MARGIN["top"] + ph}" x2="{x:.2f}" '
                   f'y2="{MARGIN["top"] + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{x:.2f}" y="{MARGIN["top"] + ph + 18}" '
                   f'text-anchor="middle">{_fmt(v)}</text>')
    for v in _ticks(lo, hi):
        y = sy(v)
        out.append(f'<line x1="{MARGIN["left"] - 5}" y1="{y:.2f}" x2="{MARGIN["left"]}" '
                   f'y2="{y:.2f}" stroke="black"/>')
        out.append(f'<text x="{MARGIN["left"] - 8}" y="{y + 4:.2f}" '
                   f'text-anchor="end">{_fmt(v)}</text>')
    out.append(f'<text x="{MARGIN["left"] + pw / 2:.2f}" y="{HEIGHT - 10}" '
               f'text-anchor="middle">t [s]</text>')
    out.append(f'<text x="16" y="{MARGIN["top"] + ph / 2:.2f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {MARGIN["top"] + ph / 2:.2f})">output</text>')

    lx = WIDTH - MARGIN["right"] + 15
    for i, yv in enumerate(ys):
        color = PALETTE[i % len(PALETTE)]
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.2" '
                   f'points="{points(yv)}"/>')
    out.append(f'<polyline fill="none" stroke="black" stroke-width="1.5" '
               f'stroke-dasharray="6,3" points="{points(y0)}"/>')
    for i in range(traj.N):
        y = MARGIN["top"] + 10 + 18 * i
        color = PALETTE[i % len(PALETTE)]
        out.append(f'<line x1="{lx}" y1="{y}" x2="{lx + 24}" y2="{y}" stroke="{color}" '
                   f'stroke-width="2"/>')
        out.append(f'<text x="{lx + 30}" y="{y + 4}">y{i + 1}</text>')
    y = MARGIN["top"] + 10 + 18 * traj.N
    out.append(f'<line x1="{lx}" y1="{y}" x2="{lx + 24}" y2="{y}" stroke="black" '
               f'stroke-width="2" stroke-dasharray="6,3"/>')
    out.append(f'<text x="{lx + 30}" y="{y + 4}">y0 (reference)</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
