"""Deterministic artifact emission: CSV, JSON, SVG, and content hashes.

All numeric output uses 17 significant digits so re-running a command
with the same config and seed reproduces files byte for byte.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np


def fmt(value: float) -> str:
    return f"{float(value):.17g}"


def write_csv(path, header: list[str], rows) -> None:
    """RFC-4180 CSV with '.' decimals and 17 significant digits."""
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    Path(path).write_text("\r\n".join(lines) + "\r\n")


def write_matrix_csv(path, matrix: np.ndarray) -> None:
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    header = [f"c{j}" for j in range(matrix.shape[1])]
    write_csv(path, header, matrix)


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _svg_frame(width: int, height: int, body: list[str]) -> str:
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">'
    )
    border = (
        f'<rect x="0.5" y="0.5" width="{width - 1}" height="{height - 1}" '
        'fill="white" stroke="black"/>'
    )
    return "\n".join([head, border] + body + ["</svg>"]) + "\n"


def _scale(points: np.ndarray, width: int, height: int, pad: int = 20):
    lo = points.min(axis=0)
    hi = points.max(axis=0)
    span = np.where(hi - lo < 1e-12, 1.0, hi - lo)

    def to_px(p):
        sx = pad + (p[0] - lo[0]) / span[0] * (width - 2 * pad)
        sy = height - pad - (p[1] - lo[1]) / span[1] * (height - 2 * pad)
        return sx, sy

    return to_px


def write_scatter_svg(path, points: np.ndarray, width: int = 480, height: int = 360) -> None:
    """Scatter plot of 2-D points without any plotting dependency."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.size == 0:
        Path(path).write_text(_svg_frame(width, height, []))
        return
    to_px = _scale(points, width, height)
    body = []
    for p in points:
        x, y = to_px(p)
        body.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="2" fill="steelblue"/>')
    Path(path).write_text(_svg_frame(width, height, body))


def write_polyline_svg(path, points: np.ndarray, width: int = 480, height: int = 360) -> None:
    """Polyline through 2-D points (trajectory phase plot)."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[0] < 2:
        write_scatter_svg(path, points, width, height)
        return
    to_px = _scale(points, width, height)
    coords = " ".join(f"{x:.2f},{y:.2f}" for x, y in (to_px(p) for p in points))
    body = [f'<polyline points="{coords}" fill="none" stroke="firebrick"/>']
    Path(path).write_text(_svg_frame(width, height, body))
