"""Organized RGB-D point cloud container."""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class OrganizedCloud:
    """Camera-frame points on the sensor's pixel grid, row-major.

    Point ``i`` sits at pixel ``(u, v) = (i % width, i // width)``. Geometry of
    points whose ``valid`` flag is false is meaningless and never read.
    """

    width: int
    height: int
    points: np.ndarray  # (N, 3) float64, meters
    valid: np.ndarray  # (N,) bool
    rgb: np.ndarray  # (N, 3) uint8

    def __post_init__(self):
        n = self.width * self.height
        pts = np.array(self.points, dtype=np.float64).reshape(n, 3)
        valid = np.array(self.valid, dtype=bool).reshape(n)
        rgb = np.array(self.rgb, dtype=np.uint8).reshape(n, 3)
        if not np.all(np.isfinite(pts[valid])):
            raise ValueError("valid points must be finite")
        for a in (pts, valid, rgb):
            a.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "valid", valid)
        object.__setattr__(self, "rgb", rgb)

    @classmethod
    def empty(cls, width, height):
        n = width * height
        return cls(width, height, np.zeros((n, 3)), np.zeros(n, bool), np.zeros((n, 3), np.uint8))

    @property
    def size(self):
        return self.width * self.height

    @property
    def image(self):
        """RGB image view, shape ``(height, width, 3)``."""
        return self.rgb.reshape(self.height, self.width, 3)

    def valid_indices(self):
        return np.flatnonzero(self.valid)

    def with_valid(self, valid):
        return OrganizedCloud(self.width, self.height, self.points, valid, self.rgb)

    def transformed(self, t):
        """Rigidly move every valid point by ``t`` (invalid entries are zeroed)."""
        pts = np.zeros_like(self.points)
        pts[self.valid] = self.points[self.valid] @ t.rotation.T + t.translation
        return OrganizedCloud(self.width, self.height, pts, self.valid, self.rgb)

    def __eq__(self, other):
        if not isinstance(other, OrganizedCloud):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and np.array_equal(self.valid, other.valid)
            and np.array_equal(self.points, other.points)
            and np.array_equal(self.rgb, other.rgb)
        )
