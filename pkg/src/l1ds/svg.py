"""Static SVG overlays of a run, written with the standard-library XML tools.

Left panel: target, reference and executed paths in the task plane, with the
executed samples that fall inside disturbance windows drawn over a wide pale
band. Right panel: tracking error against time with the windows shaded.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from typing import Optional, Sequence

import numpy as np

from .sim import RunResult

PANEL = 360.0
PAD = 36.0
COLORS = {"target": "#1f4e9c", "reference": "#8a8a8a", "executed": "#c0392b",
          "window": "#f5d76e"}


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def _points(xy: np.ndarray) -> str:
    return " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in xy)


def _decimate(arr: np.ndarray, max_points: int) -> np.ndarray:
    if len(arr) <= max_points:
        return arr
    idx = np.unique(np.linspace(0, len(arr) - 1, max_points).round().astype(int))
    return arr[idx]


class _Frame:
    """Affine map from data coordinates into a square panel at ``(x0, y0)``."""

    def __init__(self, lo, hi, x0, y0, equal=True):
        lo, hi = np.asarray(lo, float), np.asarray(hi, float)
        span = np.maximum(hi - lo, 1e-12)
        if equal:
            s = max(span)
            center = 0.5 * (lo + hi)
            lo, span = center - 0.5 * s, np.array([s, s])
        self.lo, self.span, self.x0, self.y0 = lo, span, x0, y0

    def map(self, pts: np.ndarray) -> np.ndarray:
        u = (pts - self.lo) / self.span
        return np.column_stack([self.x0 + PAD + u[:, 0] * (PANEL - 2 * PAD),
                                self.y0 + PANEL - PAD - u[:, 1] * (PANEL - 2 * PAD)])


def _polyline(parent, xy, color, width, dash=None, opacity=None):
    attrs = {"points": _points(xy), "fill": "none", "stroke": color,
             "stroke-width": _fmt(width), "stroke-linejoin": "round"}
    if dash:
        attrs["stroke-dasharray"] = dash
    if opacity is not None:
        attrs["stroke-opacity"] = _fmt(opacity)
    ET.SubElement(parent, "polyline", attrs)


def _text(parent, x, y, text, size=11, anchor="start", color="#222"):
    el = ET.SubElement(parent, "text", {"x": _fmt(x), "y": _fmt(y), "font-size": str(size),
                                        "font-family": "sans-serif", "text-anchor": anchor,
                                        "fill": color})
    el.text = text


def run_svg(result: RunResult, windows: Sequence[tuple] = (), title: Optional[str] = None,
            max_points: int = 1500) -> str:
    """SVG document (as text) for a two-dimensional run."""
    z = result.executed.states
    if z.shape[1] < 2:
        z_plot = np.column_stack([result.times, z[:, 0]])
        tgt = np.column_stack([result.target.times, result.target.states[:, 0]])
        ref = np.column_stack([result.times, result.reference.states[:, 0]])
        equal = False
    else:
        z_plot, tgt, ref = z[:, :2], result.target.states[:, :2], result.reference.states[:, :2]
        equal = True
    allpts = np.vstack([z_plot, tgt, ref])
    width, height = 2 * PANEL, PANEL + 24
    svg = ET.Element("svg", {"xmlns": "http://www.w3.org/2000/svg", "width": str(int(width)),
                             "height": str(int(height)),
                             "viewBox": f"0 0 {int(width)} {int(height)}"})
    ET.SubElement(svg, "rect", {"x": "0", "y": "0", "width": str(int(width)),
                                "height": str(int(height)), "fill": "white"})
    if title:
        _text(svg, width / 2, 16, title, size=13, anchor="middle")
    top = 24.0

    # task-plane panel
    plane = ET.SubElement(svg, "g", {"id": "task-plane"})
    frame = _Frame(allpts.min(axis=0), allpts.max(axis=0), 0.0, top, equal=equal)
    times = result.times
    for a, b in windows:
        mask = (times >= a) & (times < b)
        if mask.any():
            _polyline(plane, frame.map(z_plot[mask]), COLORS["window"], 9.0, opacity=0.8)
    _polyline(plane, frame.map(_decimate(tgt, max_points)), COLORS["target"], 1.6)
    _polyline(plane, frame.map(_decimate(ref, max_points)), COLORS["reference"], 1.0,
              dash="4 3")
    _polyline(plane, frame.map(_decimate(z_plot, max_points)), COLORS["executed"], 1.4)
    for i, name in enumerate(("target", "reference", "executed")):
        y = top + 14 + 14 * i
        ET.SubElement(plane, "line", {"x1": "10", "x2": "28", "y1": _fmt(y - 4),
                                      "y2": _fmt(y - 4), "stroke": COLORS[name],
                                      "stroke-width": "2"})
        _text(plane, 32, y, name, size=10)

    # tracking-error panel
    err = result.tracking_error()
    panel = ET.SubElement(svg, "g", {"id": "tracking-error"})
    emax = float(err.max()) if err.size and err.max() > 0 else 1.0
    ef = _Frame([0.0, 0.0], [1.0, emax], PANEL, top, equal=False)
    for a, b in windows:
        (x_a, _), (x_b, _) = ef.map(np.array([[a, 0.0], [b, 0.0]]))
        ET.SubElement(panel, "rect", {"x": _fmt(x_a), "y": _fmt(top + PAD),
                                      "width": _fmt(max(x_b - x_a, 0.5)),
                                      "height": _fmt(PANEL - 2 * PAD),
                                      "fill": COLORS["window"], "fill-opacity": "0.5"})
    axes = ef.map(np.array([[0.0, emax], [0.0, 0.0], [1.0, 0.0]]))
    _polyline(panel, axes, "#444", 1.0)
    tn = (times - times[0]) / max(times[-1] - times[0], 1e-12)
    _polyline(panel, ef.map(_decimate(np.column_stack([tn, err]), max_points)),
              COLORS["executed"], 1.4)
    _text(panel, PANEL + PAD, top + PAD - 6, f"||z - z*||  (max {emax:.3g})", size=10)
    _text(panel, 2 * PANEL - PAD, top + PANEL - PAD + 14, "t", size=10, anchor="end")
    _text(panel, PANEL + PAD, top + PANEL - 8, f"DTW(z, z*) = {result.dtw_raw:.4g}",
          size=10)
    return ET.tostring(svg, encoding="unicode")


def write_run_svg(path, result: RunResult, windows: Sequence[tuple] = (),
                  title: Optional[str] = None) -> None:
    text = run_svg(result, windows, title)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write('<?xml version="1.0" encoding="UTF-8"?>\n')
        fh.write(text)
        fh.write("\n")
