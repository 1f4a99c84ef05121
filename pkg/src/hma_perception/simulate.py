"""Deterministic stand-ins for the RGB-D camera and the microphone array.

``render_scene`` ray-casts a tabletop scene into an :class:`OrganizedCloud`
with exact ground truth. ``render_object_views`` renders one object from a
ring of viewpoints for classifier datasets. ``synth_array_signal`` produces
far-field multichannel recordings.

All randomness comes from the counter-based draws in :mod:`hma_perception.rng`
keyed by ``(seed, stream, pixel-or-sample index)``, so results do not depend on
evaluation order. Stream ids used here:

====  =========================================
 1    depth noise (normal)
 2    outlier selection (uniform)
 3    outlier depth (uniform)
 4-6  RGB jitter, one stream per channel
 100+ audio: source waveforms (100 + source index)
 200+ audio: sensor noise (200 + channel index)
====  =========================================
"""

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .classifier import Dataset, LabeledImage
from .cloud import OrganizedCloud
from .errors import InvalidSpec
from .geometry import (CameraIntrinsics, PlaneModel, RigidTransform, invert, look_at,
                       pixel_rays, transform_point)
from .localization import MicArray, MultichannelSignal, steering_delays
from .rng import counter_normal, counter_uniform

ID_NONE = 0
ID_TABLE = 1
FIRST_OBJECT_ID = 2


@dataclass(frozen=True)
class TableSpec:
    """Rectangular tabletop at world height ``height``; extents along its own x/y axes."""

    center: Tuple[float, float] = (0.0, 0.0)
    height: float = 0.7
    size: Tuple[float, float] = (1.2, 0.8)
    yaw_deg: float = 0.0
    color: Tuple[int, int, int] = (176, 144, 112)


@dataclass(frozen=True)
class ObjectSpec:
    """Box ``dimensions=(sx, sy, sz)`` or cylinder ``dimensions=(radius, height)`` standing on the table."""

    shape: str
    dimensions: Tuple[float, ...]
    position: Tuple[float, float]  # world (x, y) of the footprint centre
    color: Tuple[int, int, int]
    class_id: int = 0
    yaw_deg: float = 0.0

    @property
    def height(self):
        return self.dimensions[2] if self.shape == "box" else self.dimensions[1]


@dataclass(frozen=True)
class SceneSpec:
    table: Optional[TableSpec] = field(default_factory=TableSpec)
    objects: Sequence[ObjectSpec] = ()
    intrinsics: CameraIntrinsics = field(default_factory=CameraIntrinsics.default)
    camera_from_world: RigidTransform = field(
        default_factory=lambda: look_at((-0.35, 0.0, 1.5), (0.0, 0.0, 0.7)))
    depth_noise_sigma: float = 0.0
    outlier_fraction: float = 0.0
    outlier_depth_range: Tuple[float, float] = (0.3, 2.0)
    rgb_jitter: int = 10
    background: Tuple[int, int, int] = (0, 0, 0)
    seed: int = 0


@dataclass
class SceneTruth:
    plane: Optional[PlaneModel]  # camera frame
    object_ids: np.ndarray  # (height, width) uint8: 0 none, 1 table, 2 + k object k
    centroids_camera: List[Optional[np.ndarray]]  # visible-surface centroid per object
    camera_to_world: RigidTransform

    @property
    def centroids_world(self):
        return [None if c is None else transform_point(self.camera_to_world, c)
                for c in self.centroids_camera]


def _check_scene(spec):
    if not 0 <= spec.outlier_fraction < 1:
        raise InvalidSpec("outlier_fraction must lie in [0, 1)")
    if spec.depth_noise_sigma < 0 or spec.rgb_jitter < 0:
        raise InvalidSpec("noise levels must be non-negative")
    lo, hi = spec.outlier_depth_range
    if not 0 < lo < hi:
        raise InvalidSpec("outlier depth range must satisfy 0 < min < max")
    if len(spec.objects) > 250:
        raise InvalidSpec("at most 250 objects")
    for k, obj in enumerate(spec.objects):
        if obj.shape == "box":
            ok = len(obj.dimensions) == 3
        elif obj.shape == "cylinder":
            ok = len(obj.dimensions) == 2
        else:
            raise InvalidSpec(f"object {k}: unknown shape {obj.shape!r}")
        if not ok or min(obj.dimensions) <= 0:
            raise InvalidSpec(f"object {k}: bad dimensions {obj.dimensions}")
        if spec.table is None:
            raise InvalidSpec("objects need a table to rest on")
        lx, ly = _table_local(spec.table, np.array(obj.position, dtype=float))
        if abs(lx) > spec.table.size[0] / 2 or abs(ly) > spec.table.size[1] / 2:
            raise InvalidSpec(f"object {k} is not on the table")


def _table_local(table, xy):
    c, s = math.cos(math.radians(table.yaw_deg)), math.sin(math.radians(table.yaw_deg))
    d = xy - np.asarray(table.center, dtype=float)
    return c * d[..., 0] + s * d[..., 1], -s * d[..., 0] + c * d[..., 1]


def _hit_table(table, o, d):
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (table.height - o[2]) / d[:, 2]
    xy = o[:2] + t[:, None] * d[:, :2]
    lx, ly = _table_local(table, xy)
    ok = (d[:, 2] < 0) & (t > 0) & (np.abs(lx) <= table.size[0] / 2) & (np.abs(ly) <= table.size[1] / 2)
    return np.where(ok, t, np.inf)


def _to_object_local(obj, base_z, o, d):
    c, s = math.cos(math.radians(obj.yaw_deg)), math.sin(math.radians(obj.yaw_deg))
    rel = o - np.array([obj.position[0], obj.position[1], base_z])
    ol = np.array([c * rel[0] + s * rel[1], -s * rel[0] + c * rel[1], rel[2]])
    dl = np.stack([c * d[:, 0] + s * d[:, 1], -s * d[:, 0] + c * d[:, 1], d[:, 2]], axis=1)
    return ol, dl


def _hit_box(obj, base_z, o, d):
    ol, dl = _to_object_local(obj, base_z, o, d)
    sx, sy, sz = obj.dimensions
    lo = np.array([-sx / 2, -sy / 2, 0.0])
    hi = np.array([sx / 2, sy / 2, sz])
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = (lo - ol) / dl
        t2 = (hi - ol) / dl
    tmin = np.fmin(t1, t2)
    tmax = np.fmax(t1, t2)
    # rays parallel to a slab: inside it -> unconstrained, outside -> miss
    par = dl == 0
    inside = (ol >= lo) & (ol <= hi)
    tmin = np.where(par, np.where(inside, -np.inf, np.inf), tmin)
    tmax = np.where(par, np.where(inside, np.inf, -np.inf), tmax)
    near = tmin.max(axis=1)
    far = tmax.min(axis=1)
    ok = (near <= far) & (near > 0)
    return np.where(ok, near, np.inf)


def _hit_cylinder(obj, base_z, o, d):
    ol, dl = _to_object_local(obj, base_z, o, d)
    r, h = obj.dimensions
    a = dl[:, 0] ** 2 + dl[:, 1] ** 2
    b = 2 * (ol[0] * dl[:, 0] + ol[1] * dl[:, 1])
    c = ol[0] ** 2 + ol[1] ** 2 - r * r
    disc = b * b - 4 * a * c
    with np.errstate(divide="ignore", invalid="ignore"):
        t_side = (-b - np.sqrt(disc)) / (2 * a)
    z_side = ol[2] + t_side * dl[:, 2]
    side_ok = (a > 0) & (disc >= 0) & (t_side > 0) & (z_side >= 0) & (z_side <= h)
    best = np.where(side_ok, t_side, np.inf)
    for zc in (h, 0.0):
        with np.errstate(divide="ignore", invalid="ignore"):
            t_cap = (zc - ol[2]) / dl[:, 2]
        x = ol[0] + t_cap * dl[:, 0]
        y = ol[1] + t_cap * dl[:, 1]
        cap_ok = (dl[:, 2] != 0) & (t_cap > 0) & (x * x + y * y <= r * r)
        best = np.minimum(best, np.where(cap_ok, t_cap, np.inf))
    return best


def ray_cast(spec, rays_cam):
    """Nearest-hit depth and surface id for camera-frame rays with unit z.

    Returns ``(depth, ids)``; depth is ``inf`` where nothing is hit.
    """
    cam_to_world = invert(spec.camera_from_world)
    o = cam_to_world.translation
    d = rays_cam @ cam_to_world.rotation.T
    n = d.shape[0]
    depth = np.full(n, np.inf)
    ids = np.zeros(n, dtype=np.int64)
    if spec.table is not None:
        t = _hit_table(spec.table, o, d)
        closer = t < depth
        depth[closer], ids[closer] = t[closer], ID_TABLE
        base_z = spec.table.height
    for k, obj in enumerate(spec.objects):
        hit = _hit_box if obj.shape == "box" else _hit_cylinder
        t = hit(obj, base_z, o, d)
        closer = t < depth
        depth[closer], ids[closer] = t[closer], FIRST_OBJECT_ID + k
    return depth, ids


def render_scene(spec):
    """Organized cloud plus :class:`SceneTruth` for a tabletop scene."""
    _check_scene(spec)
    k = spec.intrinsics
    rays = pixel_rays(k).reshape(-1, 3)
    n = rays.shape[0]
    depth, ids = ray_cast(spec, rays)
    hit = np.isfinite(depth)
    pix = np.arange(n, dtype=np.uint64)

    truth_pts = np.where(hit[:, None], depth[:, None] * rays, 0.0)
    z = np.where(hit, depth, 0.0)
    if spec.depth_noise_sigma > 0:
        z = z + spec.depth_noise_sigma * counter_normal(spec.seed, 1, pix)
    if spec.outlier_fraction > 0:
        lo, hi = spec.outlier_depth_range
        out = counter_uniform(spec.seed, 2, pix) < spec.outlier_fraction
        z = np.where(out, lo + (hi - lo) * counter_uniform(spec.seed, 3, pix), z)
    valid = hit & (z > 0)
    points = np.where(valid[:, None], z[:, None] * rays, 0.0)

    base = np.tile(np.asarray(spec.background, dtype=np.int64), (n, 1))
    if spec.table is not None:
        base[ids == ID_TABLE] = spec.table.color
    for j, obj in enumerate(spec.objects):
        base[ids == FIRST_OBJECT_ID + j] = obj.color
    if spec.rgb_jitter > 0:
        span = 2 * spec.rgb_jitter + 1
        for ch in range(3):
            jit = np.floor(counter_uniform(spec.seed, 4 + ch, pix) * span).astype(np.int64) - spec.rgb_jitter
            base[:, ch] = np.where(hit, base[:, ch] + jit, base[:, ch])
    rgb = np.clip(base, 0, 255).astype(np.uint8)

    cam_to_world = invert(spec.camera_from_world)
    plane = None
    if spec.table is not None:
        world_plane = PlaneModel.from_normal_offset((0.0, 0.0, 1.0), -spec.table.height)
        plane = world_plane.transformed(spec.camera_from_world)
    centroids = []
    for j in range(len(spec.objects)):
        m = ids == FIRST_OBJECT_ID + j
        centroids.append(truth_pts[m].mean(axis=0) if m.any() else None)
    truth = SceneTruth(plane, ids.reshape(k.height, k.width).astype(np.uint8), centroids, cam_to_world)
    return OrganizedCloud(k.width, k.height, points, valid, rgb), truth


def render_object_views(obj, angles, image_size=(64, 64), classes=None, seed=0, rgb_jitter=10,
                        elevation_deg=35.0, table=None):
    """One RGB image per viewing azimuth of ``obj`` placed at the table centre.

    The camera orbits the object at ``elevation_deg`` above the tabletop, at a
    distance scaled to the object size.
    """
    angles = list(angles)
    if not angles:
        raise InvalidSpec("view protocol is empty")
    table = table or TableSpec(center=(0.0, 0.0), size=(2.0, 2.0))
    w, h = image_size
    k = CameraIntrinsics(float(w), float(w), (w - 1) / 2.0, (h - 1) / 2.0, w, h)
    obj = ObjectSpec(obj.shape, tuple(obj.dimensions), table.center, obj.color, obj.class_id, obj.yaw_deg)
    size = max(obj.dimensions[:2] if obj.shape == "box" else (2 * obj.dimensions[0],) + (obj.height,))
    dist = 1.6 * max(size, obj.height)
    target = np.array([table.center[0], table.center[1], table.height + obj.height / 2])
    el = math.radians(elevation_deg)
    if classes is None:
        classes = [f"class{i}" for i in range(obj.class_id + 1)]
    images = []
    for i, a in enumerate(angles):
        az = math.radians(a)
        eye = target + dist * np.array([math.cos(az) * math.cos(el), math.sin(az) * math.cos(el), math.sin(el)])
        spec = SceneSpec(table=table, objects=(obj,), intrinsics=k, camera_from_world=look_at(eye, target),
                         rgb_jitter=rgb_jitter, seed=(seed * 1000003 + i) & 0xFFFFFFFFFFFFFFFF)
        cloud, _ = render_scene(spec)
        images.append(LabeledImage(cloud.image.copy(), obj.class_id, float(a)))
    return Dataset(list(classes), images)


# Colours sit on centres of the 8-level histogram bins, two or more bins apart per channel.
PALETTE = [
    (208, 16, 16), (16, 208, 16), (16, 16, 208), (208, 208, 16),
    (208, 16, 208), (16, 208, 208), (112, 16, 16), (16, 112, 16),
    (16, 16, 112), (208, 112, 16), (112, 16, 208), (16, 208, 112),
    (112, 208, 16), (208, 16, 112), (16, 112, 208),
]


def color_objects(n_classes):
    """``n_classes`` table objects with distinct dominant colours, alternating box/cylinder."""
    if n_classes > len(PALETTE):
        raise InvalidSpec(f"at most {len(PALETTE)} colour classes")
    objs = []
    for i in range(n_classes):
        if i % 2 == 0:
            objs.append(ObjectSpec("box", (0.08, 0.06, 0.12), (0.0, 0.0), PALETTE[i], i))
        else:
            objs.append(ObjectSpec("cylinder", (0.035, 0.12), (0.0, 0.0), PALETTE[i], i))
    return objs


def object_dataset(objects, angles, image_size=(64, 64), seed=0, rgb_jitter=10, class_names=None):
    """Concatenated views of several objects; labels are the objects' class ids."""
    names = class_names or [f"object{i + 1:02d}" for i in range(max(o.class_id for o in objects) + 1)]
    images = []
    for j, obj in enumerate(objects):
        ds = render_object_views(obj, angles, image_size, names, seed * 7919 + j, rgb_jitter)
        images.extend(ds.images)
    return Dataset(list(names), images)


@dataclass(frozen=True)
class AudioSource:
    azimuth: float
    waveform: str = "noise"  # sine | noise | file
    level: float = 0.1  # RMS amplitude at each microphone
    frequency: float = 1000.0  # sine only
    band: Tuple[float, float] = (500.0, 3000.0)  # noise only
    path: Optional[str] = None  # file only


@dataclass(frozen=True)
class AudioSceneSpec:
    sources: Sequence[AudioSource] = (AudioSource(90.0),)
    snr_db: float = 20.0
    duration: float = 1.0
    seed: int = 0


FD_TAPS = 32
_PAD = 64


def fractional_delay_taps(delay):
    """Blackman-windowed sinc taps delaying by ``delay`` samples; returns ``(offsets, taps)``."""
    base = math.floor(delay)
    offsets = np.arange(base - FD_TAPS // 2 + 1, base + FD_TAPS // 2 + 1)
    x = offsets - delay
    win = 0.42 + 0.5 * np.cos(2 * np.pi * x / FD_TAPS) + 0.08 * np.cos(4 * np.pi * x / FD_TAPS)
    return offsets, np.sinc(x) * win


def _source_waveform(src, index, n, fs, seed):
    total = n + 2 * _PAD
    t = np.arange(total) / fs
    if src.waveform == "sine":
        w = np.sin(2 * np.pi * src.frequency * t)
    elif src.waveform == "noise":
        w = counter_normal(seed, 100 + index, np.arange(total, dtype=np.uint64))
        spec = np.fft.rfft(w)
        f = np.fft.rfftfreq(total, 1.0 / fs)
        spec[(f < src.band[0]) | (f > src.band[1])] = 0
        w = np.fft.irfft(spec, total)
    elif src.waveform == "file":
        from .fileio import read_wav
        sig = read_wav(src.path)
        if sig.sample_rate != fs:
            raise InvalidSpec(f"{src.path}: sample rate {sig.sample_rate} != {fs}")
        w = np.zeros(total)
        m = min(total, sig.n_samples)
        w[:m] = sig.channels[0, :m]
    else:
        raise InvalidSpec(f"unknown waveform {src.waveform!r}")
    rms = np.sqrt(np.mean(w[_PAD:_PAD + n] ** 2))
    if rms == 0:
        raise InvalidSpec("source waveform is silent")
    return w * (src.level / rms)


def synth_array_signal(array, spec):
    """Far-field plane-wave recording of ``spec.sources`` on ``array``."""
    if spec.duration <= 0:
        raise InvalidSpec("duration must be positive")
    fs = array.sample_rate
    n = int(round(spec.duration * fs))
    if n < 1:
        raise InvalidSpec("duration shorter than one sample")
    out = np.zeros((array.n_mics, n))
    for i, src in enumerate(spec.sources):
        if not 0 <= src.azimuth < 360:
            raise InvalidSpec(f"azimuth {src.azimuth} outside [0, 360)")
        w = _source_waveform(src, i, n, fs, spec.seed)
        delays = steering_delays(array, [src.azimuth])[0] * fs
        for m, dly in enumerate(delays):
            offsets, taps = fractional_delay_taps(dly)
            if np.abs(offsets).max() >= _PAD:
                raise InvalidSpec("array aperture too large for the delay line")
            acc = np.zeros(n)
            for off, h in zip(offsets, taps):
                acc += h * w[_PAD - off:_PAD - off + n]
            out[m] += acc
    if math.isfinite(spec.snr_db) and spec.sources:
        p_sig = np.mean(out ** 2)
        sigma = math.sqrt(p_sig / 10 ** (spec.snr_db / 10))
        for m in range(array.n_mics):
            out[m] += sigma * counter_normal(spec.seed, 200 + m, np.arange(n, dtype=np.uint64))
    return MultichannelSignal(out, fs)
