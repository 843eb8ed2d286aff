"""Trajectory rasterization: online record -> offline grayscale image.

The pen-down trajectory is scaled isotropically to fit the canvas minus
margins (further shrunk by the brush extent so ink never escapes the margin
box), centered, and drawn stroke by stroke with Bresenham line segments and a
square brush. Strokes are never connected across pen lifts, ink is binary
(0 = ink on 255 = background), and no anti-aliasing is applied.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import IoError, NoInk
from .ingest import HandwritingRecord, segment_strokes

INK = 0
BACKGROUND = 255


@dataclass(frozen=True)
class RasterConfig:
    canvas: int = 256
    margin_frac: float = 0.08
    stroke_width: int = 2
    flip_y: bool = True

    def __post_init__(self):
        if self.canvas <= 0:
            raise ValueError("canvas must be positive")
        if not 0.0 <= self.margin_frac <= 0.4:
            raise ValueError("margin_frac must be in [0, 0.4]")
        if self.stroke_width < 1:
            raise ValueError("stroke_width must be >= 1")


@dataclass(frozen=True)
class RasterImage:
    """Row-major grayscale grid, 0 = ink, 255 = background."""

    width: int
    height: int
    pixels: np.ndarray

    def __post_init__(self):
        pixels = np.asarray(self.pixels, dtype=np.uint8)
        if pixels.shape != (self.height, self.width):
            raise ValueError(f"pixel grid {pixels.shape} does not match {self.height}x{self.width}")
        object.__setattr__(self, "pixels", pixels)

    def ink_mask(self) -> np.ndarray:
        return self.pixels < 128


def _brush_offsets(width: int) -> tuple[range, range]:
    lo = -((width - 1) // 2)
    hi = width // 2
    return range(lo, hi + 1), range(lo, hi + 1)


def _stamp(grid: np.ndarray, px: int, py: int, width: int) -> None:
    """Paint a square brush, clipped to the canvas."""
    ys, xs = _brush_offsets(width)
    h, w = grid.shape
    for dy in ys:
        y = py + dy
        if not 0 <= y < h:
            continue
        for dx in xs:
            x = px + dx
            if 0 <= x < w:
                grid[y, x] = INK


def _bresenham(x0: int, y0: int, x1: int, y1: int) -> list[tuple[int, int]]:
    """Integer line rasterization between two pixel coordinates."""
    points = []
    dx = abs(x1 - x0)
    dy = -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    x, y = x0, y0
    while True:
        points.append((x, y))
        if x == x1 and y == y1:
            break
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x += sx
        if e2 <= dx:
            err += dx
            y += sy
    return points


def rasterize(record: HandwritingRecord, config: RasterConfig = RasterConfig()) -> RasterImage:
    """Render the pen-down trajectory onto a square canvas.

    A degenerate trajectory (all points identical) yields a single brush stamp
    at the canvas center rather than an error.
    """
    strokes = segment_strokes(record)
    if not strokes:
        raise NoInk(record.sample_id)

    xs = np.array([s.x for stroke in strokes for s in stroke.samples], dtype=np.float64)
    ys = np.array([s.y for stroke in strokes for s in stroke.samples], dtype=np.float64)
    min_x, max_x = xs.min(), xs.max()
    min_y, max_y = ys.min(), ys.max()
    extent = max(max_x - min_x, max_y - min_y)

    canvas = config.canvas
    # Usable span for point centers: canvas minus margins minus brush extent.
    span = canvas * (1.0 - 2.0 * config.margin_frac) - (config.stroke_width - 1)
    span = max(span, 1.0)
    scale = span / extent if extent > 0 else 0.0
    # For even widths the square brush is one pixel heavier right/down; shift
    # the anchor so the ink footprint stays centered inside the margin box.
    offsets, _ = _brush_offsets(config.stroke_width)
    brush_center = (offsets[0] + offsets[-1]) / 2.0
    cx = (canvas - 1) / 2.0 - brush_center
    cy = (canvas - 1) / 2.0 - brush_center
    mid_x = (min_x + max_x) / 2.0
    mid_y = (min_y + max_y) / 2.0

    def to_pixel(x: float, y: float) -> tuple[int, int]:
        u = (x - mid_x) * scale
        v = (y - mid_y) * scale
        px = int(round(cx + u))
        py = int(round(cy - v)) if config.flip_y else int(round(cy + v))
        return px, py

    grid = np.full((canvas, canvas), BACKGROUND, dtype=np.uint8)
    for stroke in strokes:
        pts = [to_pixel(s.x, s.y) for s in stroke.samples]
        if len(pts) == 1:
            _stamp(grid, pts[0][0], pts[0][1], config.stroke_width)
            continue
        for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
            for px, py in _bresenham(x0, y0, x1, y1):
                _stamp(grid, px, py, config.stroke_width)
    return RasterImage(width=canvas, height=canvas, pixels=grid)


def write_png(image: RasterImage, path: str | Path) -> None:
    """Write an 8-bit grayscale PNG (bit-exact on re-read)."""
    try:
        Image.fromarray(image.pixels, mode="L").save(Path(path), format="PNG")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def read_png(path: str | Path) -> RasterImage:
    try:
        with Image.open(Path(path)) as img:
            arr = np.asarray(img.convert("L"), dtype=np.uint8)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    return RasterImage(width=arr.shape[1], height=arr.shape[0], pixels=arr)


def write_sidecar(path: str | Path, sample_id: str, config: RasterConfig) -> None:
    """Record the rendering parameters next to an image."""
    lines = [
        f"sample_id={sample_id}",
        f"canvas={config.canvas}",
        f"margin_frac={config.margin_frac}",
        f"stroke_width={config.stroke_width}",
        f"flip_y={int(config.flip_y)}",
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
