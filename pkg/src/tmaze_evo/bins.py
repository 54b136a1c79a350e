"""Spatial bin grid used by logging-free analyses and layout validation.

The arena is tessellated into bin_w x bin_h cells column-major from the
origin; when the arena height is not a multiple of bin_h the top row is the
remaining sliver (half height for the canonical 1.25 m arena with 0.10 m
bins). Corridor bins are the cells whose centres lie in the layout's free
space.
"""

from __future__ import annotations

import math

import numpy as np

from .geometry import point_in_free_space


class BinGrid:
    def __init__(self, width: float, height: float, bin_w: float, bin_h: float):
        self.width = width
        self.height = height
        self.bin_w = bin_w
        self.bin_h = bin_h
        self.cols = int(round(width / bin_w))
        self.rows = int(math.ceil(height / bin_h - 1e-9))
        # height of the top (possibly partial) row
        self.top_h = height - (self.rows - 1) * bin_h

    def bin_of(self, x: float, y: float) -> tuple[int, int]:
        col = min(max(int(x / self.bin_w), 0), self.cols - 1)
        row = min(max(int(y / self.bin_h), 0), self.rows - 1)
        return col, row

    def bins_of(self, xy: np.ndarray) -> np.ndarray:
        """Vectorized bin_of over an (N, 2) position array -> (N, 2) ints."""
        cols = np.clip((xy[:, 0] / self.bin_w).astype(int), 0, self.cols - 1)
        rows = np.clip((xy[:, 1] / self.bin_h).astype(int), 0, self.rows - 1)
        return np.column_stack([cols, rows])

    def center(self, col: int, row: int) -> tuple[float, float]:
        x = (col + 0.5) * self.bin_w
        if row == self.rows - 1:
            y = (self.rows - 1) * self.bin_h + self.top_h / 2.0
        else:
            y = (row + 0.5) * self.bin_h
        return x, y

    def corridor_bins(self, free_rects) -> list[tuple[int, int]]:
        """Cells whose centre lies in free space, sorted by (row, col)."""
        out = []
        for row in range(self.rows):
            for col in range(self.cols):
                x, y = self.center(col, row)
                if point_in_free_space(free_rects, x, y):
                    out.append((col, row))
        return out

    def bin_distance(self, a: tuple[int, int], b: tuple[int, int]) -> float:
        """Euclidean distance between bin centres in bin units."""
        ax, ay = self.center(*a)
        bx, by = self.center(*b)
        return math.hypot((ax - bx) / self.bin_w, (ay - by) / self.bin_h)
