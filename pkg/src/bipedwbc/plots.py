"""Deterministic SVG phase-plane figures (no plotting dependency).

One polyline per step in the (position, velocity) plane, markers for the
stance foot, the commanded landing, and the actual landing (drawn on the
velocity = 0 axis), and optional overlays: the kinematic-feasibility wedge
|k_p x + k_d xd| <= p_max and uncertainty-ball circles.
"""

from __future__ import annotations

import numpy as np

_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
           "#8c564b", "#e377c2", "#17becf"]


def _fmt(v):
    return f"{v:.3f}"


class SvgCanvas:
    def __init__(self, width=640, height=480):
        self.w = width
        self.h = height
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
            f'height="{height}" viewBox="0 0 {width} {height}">',
            f'<rect width="{width}" height="{height}" fill="white"/>',
        ]

    def line(self, x1, y1, x2, y2, stroke="#888", width=1.0, dash=None):
        d = f' stroke-dasharray="{dash}"' if dash else ""
        self.parts.append(
            f'<line x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" y2="{_fmt(y2)}" '
            f'stroke="{stroke}" stroke-width="{width}"{d}/>')

    def polyline(self, pts, stroke="#1f77b4", width=1.2):
        s = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in pts)
        self.parts.append(
            f'<polyline points="{s}" fill="none" stroke="{stroke}" '
            f'stroke-width="{width}"/>')

    def circle(self, cx, cy, r, stroke="#333", fill="none", width=1.2):
        self.parts.append(
            f'<circle cx="{_fmt(cx)}" cy="{_fmt(cy)}" r="{_fmt(r)}" '
            f'stroke="{stroke}" fill="{fill}" stroke-width="{width}"/>')

    def cross(self, cx, cy, size=4.0, stroke="#00a", width=1.4):
        self.line(cx - size, cy - size, cx + size, cy + size, stroke, width)
        self.line(cx - size, cy + size, cx + size, cy - size, stroke, width)

    def star(self, cx, cy, size=5.0, stroke="#c00", width=1.4):
        self.line(cx - size, cy, cx + size, cy, stroke, width)
        self.line(cx, cy - size, cx, cy + size, stroke, width)
        s = size * 0.7071
        self.line(cx - s, cy - s, cx + s, cy + s, stroke, width)
        self.line(cx - s, cy + s, cx + s, cy - s, stroke, width)

    def text(self, x, y, s, size=12, fill="#222", anchor="start"):
        self.parts.append(
            f'<text x="{_fmt(x)}" y="{_fmt(y)}" font-size="{size}" '
            f'fill="{fill}" text-anchor="{anchor}" '
            f'font-family="sans-serif">{s}</text>')

    def to_string(self):
        return "\n".join(self.parts + ["</svg>"]) + "\n"


class PhaseAxes:
    """Maps phase-plane coordinates to pixels with fixed margins."""

    def __init__(self, xlim, ylim, width=640, height=480, margin=50):
        self.canvas = SvgCanvas(width, height)
        self.m = margin
        self.xlim = xlim
        self.ylim = ylim
        self.sx = (width - 2 * margin) / (xlim[1] - xlim[0])
        self.sy = (height - 2 * margin) / (ylim[1] - ylim[0])

    def px(self, x):
        return self.m + (x - self.xlim[0]) * self.sx

    def py(self, y):
        return self.canvas.h - self.m - (y - self.ylim[0]) * self.sy

    def frame(self, xlabel, ylabel, title=""):
        c = self.canvas
        m = self.m
        c.line(m, c.h - m, c.w - m, c.h - m, "#000", 1.2)
        c.line(m, m, m, c.h - m, "#000", 1.2)
        if self.xlim[0] < 0 < self.xlim[1]:
            c.line(self.px(0), m, self.px(0), c.h - m, "#ccc", 0.8)
        if self.ylim[0] < 0 < self.ylim[1]:
            c.line(m, self.py(0), c.w - m, self.py(0), "#ccc", 0.8)
        for v in np.linspace(self.xlim[0], self.xlim[1], 5):
            c.text(self.px(v), c.h - m + 16, f"{v:.2f}", 10, anchor="middle")
        for v in np.linspace(self.ylim[0], self.ylim[1], 5):
            c.text(m - 6, self.py(v) + 4, f"{v:.2f}", 10, anchor="end")
        c.text(c.w / 2, c.h - 12, xlabel, 12, anchor="middle")
        c.text(14, c.h / 2, ylabel, 12, anchor="middle")
        if title:
            c.text(c.w / 2, 22, title, 14, anchor="middle")


def phase_plane_svg(steps, wedge=None, balls=(), xlabel="position (m)",
                    ylabel="velocity (m/s)", title="", xlim=None, ylim=None):
    """Render step trajectories in the phase plane.

    steps: list of dicts with keys 'traj' ((N,2) array), and optionally
    'stance', 'commanded', 'actual' (scalars on the position axis).
    wedge: (k_p, k_d, p_max) for the |K x| <= p_max feasibility lines.
    balls: radii of origin-centered circles.
    """
    pts = [s["traj"] for s in steps if len(s.get("traj", ())) > 0]
    if not pts and not balls:
        raise ValueError("nothing to plot: no trajectories and no overlays")
    allp = np.vstack(pts) if pts else np.zeros((1, 2))
    extent = max(float(np.max(np.abs(allp))) if pts else 0.0,
                 max(balls) if balls else 0.0, 0.05) * 1.15
    if xlim is None:
        xlim = (-extent, extent)
    if ylim is None:
        ylim = (-extent, extent)
    ax = PhaseAxes(xlim, ylim)
    ax.frame(xlabel, ylabel, title)
    c = ax.canvas

    if wedge is not None:
        kp, kd, pmax = wedge
        for sign in (1.0, -1.0):
            # k_p x + k_d xd = sign * pmax across the x range
            x0, x1 = xlim
            y0 = (sign * pmax - kp * x0) / kd
            y1 = (sign * pmax - kp * x1) / kd
            c.line(ax.px(x0), ax.py(y0), ax.px(x1), ax.py(y1),
                   stroke="#7fb2d9", width=1.4, dash="6,4")
    for i, r in enumerate(balls):
        c.circle(ax.px(0), ax.py(0), r * ax.sx,
                 stroke=["#e6842a", "#2a6fe6"][i % 2], width=1.6)
    for i, s in enumerate(steps):
        traj = np.asarray(s.get("traj", ()))
        color = _COLORS[i % len(_COLORS)]
        if len(traj):
            c.polyline([(ax.px(x), ax.py(v)) for x, v in traj], stroke=color)
        if s.get("stance") is not None:
            c.star(ax.px(s["stance"]), ax.py(0.0))
        if s.get("commanded") is not None:
            c.circle(ax.px(s["commanded"]), ax.py(0.0), 4.0, stroke="#c00")
        if s.get("actual") is not None:
            c.cross(ax.px(s["actual"]), ax.py(0.0))
    return c.to_string()


def _read_csv(path):
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    return header, rows


def emit_phase_plot(out_dir, axis="y", ball_bounds=None, lip=None, plan=None):
    """Build the phase-plane SVG from a scenario output directory (log.csv +
    steps.csv). Returns the SVG text."""
    import os

    from .planner import LipParams, PlannerParams, tvr_gains
    from .uncertainty import UncertaintyBounds, analyze

    if axis not in ("x", "y"):
        raise ValueError("axis must be 'x' or 'y'")
    log_path = os.path.join(out_dir, "log.csv")
    steps_path = os.path.join(out_dir, "steps.csv")
    header, rows = _read_csv(log_path)
    sh, srows = _read_csv(steps_path)
    if not srows:
        raise ValueError("log contains no planner records")
    col = {name: i for i, name in enumerate(header)}
    scol = {name: i for i, name in enumerate(sh)}
    ai = 0 if axis == "x" else 1
    pos_c = col["obs_x" if axis == "x" else "obs_y"]
    vel_c = col["obs_vx" if axis == "x" else "obs_vy"]
    org_c = col["origin_x" if axis == "x" else "origin_y"]
    step_c = col["step_idx"]

    by_step = {}
    for r in rows:
        sidx = int(r[step_c])
        by_step.setdefault(sidx, []).append(
            (float(r[pos_c]) - float(r[org_c]), float(r[vel_c])))
    steps = []
    for r in srows:
        sidx = int(r[scol["index"]])
        traj = np.array(by_step.get(sidx, []))
        cmd = float(r[scol["cmd_x" if axis == "x" else "cmd_y"]])
        act = r[scol["actual_x" if axis == "x" else "actual_y"]]
        steps.append(dict(
            traj=traj,
            commanded=cmd,
            actual=(float(act) if act != "nan" else None),
            stance=None))
    lip = lip or LipParams()
    plan = plan or PlannerParams()
    K = tvr_gains(plan, lip, ai)
    balls = []
    if ball_bounds is not None:
        dm, em = ball_bounds
        balls = [analyze(lip, plan, UncertaintyBounds(dm, em), axis=ai).radius]
    return phase_plane_svg(steps, wedge=(K[0], K[1], plan.max_step), balls=balls,
                           xlabel=f"{axis} (m)", ylabel=f"d{axis}/dt (m/s)",
                           title=f"CoM phase plane ({axis})")
