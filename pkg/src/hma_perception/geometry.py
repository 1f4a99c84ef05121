"""Rigid transforms, pinhole projection and plane primitives.

Camera frame convention: x right, y down, z forward (optical frame).
Points are plain ``numpy`` arrays of shape ``(3,)`` or ``(N, 3)`` in meters.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import NonPositiveDepth

ORTHO_TOL = 1e-9


def vec3(x, y=None, z=None):
    """Build a finite float64 3-vector from three scalars or one sequence."""
    v = np.asarray([x, y, z] if y is not None else x, dtype=np.float64).reshape(3)
    if not np.all(np.isfinite(v)):
        raise ValueError(f"non-finite vector {v}")
    return v


def _frozen(a):
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class RigidTransform:
    """SE(3) pose mapping ``p`` to ``rotation @ p + translation``."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        r = _frozen(self.rotation).reshape(3, 3)
        t = _frozen(self.translation).reshape(3)
        if not (np.all(np.isfinite(r)) and np.all(np.isfinite(t))):
            raise ValueError("transform has non-finite entries")
        if np.abs(r.T @ r - np.eye(3)).max() >= ORTHO_TOL or np.linalg.det(r) <= 0:
            raise ValueError("rotation is not a proper orthonormal matrix")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls):
        return cls()

    @classmethod
    def from_matrix(cls, m):
        m = np.asarray(m, dtype=np.float64)
        return cls(m[:3, :3], m[:3, 3])

    def matrix(self):
        """4x4 homogeneous matrix."""
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def __matmul__(self, other):
        return compose(self, other)


def rotation_about_axis(axis, angle_rad):
    """Rodrigues rotation matrix."""
    k = np.asarray(axis, dtype=np.float64)
    k = k / np.linalg.norm(k)
    kx = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    r = np.eye(3) + np.sin(angle_rad) * kx + (1 - np.cos(angle_rad)) * (kx @ kx)
    return _reorthonormalize(r)


def rotation_z(angle_deg):
    return rotation_about_axis((0, 0, 1), np.deg2rad(angle_deg))


def _reorthonormalize(r):
    u, _, vt = np.linalg.svd(r)
    out = u @ vt
    if np.linalg.det(out) < 0:
        u[:, -1] *= -1
        out = u @ vt
    return out


def look_at(eye, target, up=(0.0, 0.0, 1.0)):
    """Camera-from-world transform for an optical-frame camera at ``eye`` looking at ``target``.

    ``up`` is the world up direction; it ends up pointing towards -y in the image.
    """
    eye = vec3(eye)
    forward = vec3(target) - eye
    forward /= np.linalg.norm(forward)
    right = np.cross(forward, vec3(up))
    if np.linalg.norm(right) < 1e-12:
        raise ValueError("view direction is parallel to the up vector")
    right /= np.linalg.norm(right)
    down = np.cross(forward, right)
    r_cw = _reorthonormalize(np.vstack([right, down, forward]))
    return RigidTransform(r_cw, -r_cw @ eye)


def transform_point(t, p):
    """Apply ``t`` to a point ``(3,)`` or a stack of points ``(N, 3)``."""
    p = np.asarray(p, dtype=np.float64)
    return p @ t.rotation.T + t.translation


def transform_direction(t, v):
    return np.asarray(v, dtype=np.float64) @ t.rotation.T


def compose(a, b):
    """Transform equivalent to applying ``b`` first, then ``a``."""
    r = _reorthonormalize(a.rotation @ b.rotation)
    return RigidTransform(r, a.rotation @ b.translation + a.translation)


def invert(t):
    rt = t.rotation.T
    return RigidTransform(rt, -rt @ t.translation)


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point outside the image")

    @classmethod
    def default(cls):
        """Kinect-class VGA sensor."""
        return cls(525.0, 525.0, 319.5, 239.5, 640, 480)


def project_point(k, p):
    """Pixel coordinates ``(u, v)`` of camera-frame point(s) ``p``."""
    p = np.asarray(p, dtype=np.float64)
    z = p[..., 2]
    if np.any(z <= 0):
        raise NonPositiveDepth(f"point behind or on the image plane (z={np.min(z)})")
    u = k.fx * p[..., 0] / z + k.cx
    v = k.fy * p[..., 1] / z + k.cy
    return np.stack([u, v], axis=-1)


def back_project(k, u, v, z):
    """Camera-frame point at pixel ``(u, v)`` with depth ``z``."""
    u, v, z = (np.asarray(a, dtype=np.float64) for a in (u, v, z))
    return np.stack([(u - k.cx) * z / k.fx, (v - k.cy) * z / k.fy, z], axis=-1)


def pixel_rays(k):
    """Per-pixel ray directions with unit z component, shape ``(height, width, 3)``."""
    v, u = np.mgrid[0:k.height, 0:k.width].astype(np.float64)
    return back_project(k, u, v, np.ones_like(u))


@dataclass(frozen=True)
class PlaneModel:
    """Plane ``{p : normal . p + offset = 0}`` with the camera origin on the non-negative side."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        n = _frozen(self.normal).reshape(3)
        if abs(np.linalg.norm(n) - 1.0) >= 1e-9:
            raise ValueError("plane normal must be unit length")
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "offset", float(self.offset))

    @classmethod
    def from_normal_offset(cls, normal, offset):
        """Normalize and orient so that ``offset >= 0``."""
        n = np.asarray(normal, dtype=np.float64)
        s = np.linalg.norm(n)
        n, d = n / s, float(offset) / s
        if d < 0:
            n, d = -n, -d
        return cls(n, d)

    @classmethod
    def from_point_normal(cls, point, normal):
        n = np.asarray(normal, dtype=np.float64)
        return cls.from_normal_offset(n, -float(n @ np.asarray(point, dtype=np.float64)))

    def transformed(self, t):
        """The same plane expressed in the frame ``t`` maps into."""
        n = t.rotation @ self.normal
        return PlaneModel.from_normal_offset(n, self.offset - n @ t.translation)


def signed_plane_distance(plane, p):
    return np.asarray(p, dtype=np.float64) @ plane.normal + plane.offset


def angle_between_deg(a, b):
    """Unsigned angle between two directions, ignoring orientation sign."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    c = abs(a @ b) / (np.linalg.norm(a) * np.linalg.norm(b))
    return float(np.degrees(np.arccos(min(1.0, c))))
