"""JSON run configuration.

Every field is optional; omitted fields take the values in :data:`DEFAULTS`.
Unknown keys are rejected with a :class:`ParseError` naming the full key path.
List-valued fields (``pass_through``, ``objects``, ``sources``) replace the
default list wholesale; each element is checked against its own schema.

A single ``seed`` drives RANSAC sampling, scene rendering and audio
synthesis. The ``HMA_SEED`` environment variable overrides it; command-line
flags override both.
"""

import copy
import math
import os

from .errors import ParseError
from .geometry import CameraIntrinsics, RigidTransform, invert, look_at
from .localization import LocalizationParams, MicArray
from .segmentation import ClusterParams, PassThroughLimits, PipelineConfig, RansacParams
from .simulate import AudioSceneSpec, AudioSource, ObjectSpec, PALETTE, SceneSpec, TableSpec

DEFAULTS = {
    "seed": 0,
    "camera": {
        "intrinsics": {"fx": 525.0, "fy": 525.0, "cx": 319.5, "cy": 239.5, "width": 640, "height": 480},
        # null: derive from scene.camera, treating the scene's world frame as the robot frame
        "camera_to_robot": None,
    },
    "pipeline": {
        "pass_through": [{"axis": "z", "min": 0.3, "max": 1.5}],
        "ransac": {"iterations": 500, "inlier_threshold": 0.008, "min_inlier_fraction": 0.15},
        "min_height": 0.01,
        "max_height": 0.40,
        "cluster": {"tolerance": 0.02, "min_points": 30, "max_points": 50000},
        "roi_padding": 5,
    },
    "classifier": {
        "bins": 8,
        "brightness_factors": [0.9, 1.0, 1.1],
        "eval_classes": None,
    },
    "dataset": {
        "n_classes": 12,
        "n_views": 12,
        "step_degrees": 30.0,
        "image_size": [64, 64],
        "rgb_jitter": 10,
    },
    "array": {
        "n_mics": 8,
        "radius": 0.0365,
        "positions": None,
        "sample_rate": 16000.0,
        "speed_of_sound": 343.0,
    },
    "localization": {
        "frame_size": 512,
        "hop": 256,
        "window": "hann",
        "band": [500.0, 3000.0],
        "n_sources": 1,
        "grid_step": 1.0,
    },
    "scene": {
        "table": {"center": [0.0, 0.0], "height": 0.7, "size": [1.2, 0.8], "yaw_deg": 0.0,
                  "color": [176, 144, 112]},
        "objects": [
            {"shape": "box", "dimensions": [0.08, 0.06, 0.12], "position": [0.0, -0.2],
             "color": list(PALETTE[0]), "class_id": 0, "yaw_deg": 0.0},
            {"shape": "cylinder", "dimensions": [0.035, 0.12], "position": [0.05, 0.0],
             "color": list(PALETTE[1]), "class_id": 1, "yaw_deg": 0.0},
            {"shape": "box", "dimensions": [0.06, 0.06, 0.10], "position": [-0.05, 0.2],
             "color": list(PALETTE[2]), "class_id": 2, "yaw_deg": 20.0},
        ],
        "camera": {"eye": [-0.35, 0.0, 1.5], "target": [0.0, 0.0, 0.7]},
        "depth_noise_sigma": 0.0,
        "outlier_fraction": 0.0,
        "outlier_depth_range": [0.3, 2.0],
        "rgb_jitter": 10,
        "background": [0, 0, 0],
    },
    "audio": {
        "sources": [{"azimuth": 90.0, "waveform": "noise", "level": 0.1, "frequency": 1000.0,
                     "band": [500.0, 3000.0], "path": None}],
        "snr_db": 20.0,
        "duration": 1.0,
    },
}

LIST_SCHEMAS = {
    "pipeline.pass_through": {"axis": "z", "min": 0.0, "max": 1.0},
    "scene.objects": DEFAULTS["scene"]["objects"][0],
    "audio.sources": DEFAULTS["audio"]["sources"][0],
}

NULLABLE_DICTS = {"camera.camera_to_robot": {"rotation": None, "translation": None},
                  "scene.table": DEFAULTS["scene"]["table"]}


def _merge(default, user, path):
    if not isinstance(user, dict):
        raise ParseError("expected an object", path or "<root>")
    out = copy.deepcopy(default)
    for key, val in user.items():
        kp = f"{path}.{key}" if path else key
        if key not in default:
            raise ParseError(f"unknown key {kp!r}", kp)
        if kp in LIST_SCHEMAS:
            if not isinstance(val, list):
                raise ParseError("expected a list", kp)
            out[key] = [_merge(LIST_SCHEMAS[kp], v, f"{kp}[{i}]") for i, v in enumerate(val)]
        elif kp in NULLABLE_DICTS:
            out[key] = None if val is None else _merge(NULLABLE_DICTS[kp], val, kp)
        elif isinstance(default[key], dict):
            out[key] = _merge(default[key], val, kp)
        else:
            out[key] = val
    return out


class RunConfig:
    """Merged configuration with builders for the domain objects."""

    def __init__(self, data=None):
        self.data = _merge(DEFAULTS, data or {}, "")
        env = os.environ.get("HMA_SEED")
        if env is not None:
            try:
                self.data["seed"] = int(env)
            except ValueError:
                raise ParseError(f"HMA_SEED is not an integer: {env!r}", "HMA_SEED") from None

    @classmethod
    def load(cls, path):
        from .fileio import load_json
        if path is None:
            return cls()
        data = load_json(path)
        try:
            return cls(data)
        except ParseError as e:
            raise ParseError(e.reason, e.location, path) from None

    @property
    def seed(self):
        return int(self.data["seed"])

    @seed.setter
    def seed(self, value):
        self.data["seed"] = int(value)

    def _build(self, where, fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (TypeError, ValueError, KeyError, IndexError) as e:
            raise ParseError(f"invalid value: {e}", where) from None

    def intrinsics(self):
        return self._build("camera.intrinsics", lambda d: CameraIntrinsics(
            float(d["fx"]), float(d["fy"]), float(d["cx"]), float(d["cy"]),
            int(d["width"]), int(d["height"])), self.data["camera"]["intrinsics"])

    def scene_camera(self):
        cam = self.data["scene"]["camera"]
        return self._build("scene.camera", look_at, cam["eye"], cam["target"])

    def camera_to_robot(self):
        t = self.data["camera"]["camera_to_robot"]
        if t is None:
            return invert(self.scene_camera())
        return self._build("camera.camera_to_robot", RigidTransform, t["rotation"], t["translation"])

    def pipeline(self):
        p = self.data["pipeline"]

        def build():
            return PipelineConfig(
                pass_through=tuple(PassThroughLimits(str(l["axis"]), float(l["min"]), float(l["max"]))
                                   for l in p["pass_through"]),
                ransac=RansacParams(int(p["ransac"]["iterations"]), float(p["ransac"]["inlier_threshold"]),
                                    float(p["ransac"]["min_inlier_fraction"]), self.seed),
                min_height=float(p["min_height"]),
                max_height=float(p["max_height"]),
                cluster=ClusterParams(float(p["cluster"]["tolerance"]), int(p["cluster"]["min_points"]),
                                      int(p["cluster"]["max_points"])),
                roi_padding=int(p["roi_padding"]),
                intrinsics=self.intrinsics(),
                camera_to_robot=self.camera_to_robot(),
            )
        return self._build("pipeline", build)

    def scene(self):
        s = self.data["scene"]

        def build():
            t = s["table"]
            table = None if t is None else TableSpec(tuple(t["center"]), float(t["height"]), tuple(t["size"]),
                                                     float(t["yaw_deg"]), tuple(int(c) for c in t["color"]))
            objs = tuple(ObjectSpec(str(o["shape"]), tuple(float(x) for x in o["dimensions"]),
                                    tuple(float(x) for x in o["position"]), tuple(int(c) for c in o["color"]),
                                    int(o["class_id"]), float(o["yaw_deg"])) for o in s["objects"])
            return SceneSpec(table, objs, self.intrinsics(), self.scene_camera(),
                             float(s["depth_noise_sigma"]), float(s["outlier_fraction"]),
                             tuple(float(x) for x in s["outlier_depth_range"]), int(s["rgb_jitter"]),
                             tuple(int(c) for c in s["background"]), self.seed)
        return self._build("scene", build)

    def mic_array(self):
        a = self.data["array"]

        def build():
            if a["positions"] is not None:
                return MicArray(a["positions"], float(a["sample_rate"]), float(a["speed_of_sound"]))
            return MicArray.circular(int(a["n_mics"]), float(a["radius"]), float(a["sample_rate"]),
                                     float(a["speed_of_sound"]))
        return self._build("array", build)

    def localization(self):
        p = self.data["localization"]
        return self._build("localization", lambda: LocalizationParams(
            int(p["frame_size"]), int(p["hop"]), str(p["window"]), tuple(float(x) for x in p["band"]),
            int(p["n_sources"]), float(p["grid_step"])))

    def audio(self):
        a = self.data["audio"]

        def snr(v):
            if isinstance(v, str) and v.lower() in ("inf", "+inf"):
                return math.inf
            return float(v)

        return self._build("audio", lambda: AudioSceneSpec(
            tuple(AudioSource(float(s["azimuth"]), str(s["waveform"]), float(s["level"]),
                              float(s["frequency"]), tuple(float(x) for x in s["band"]), s["path"])
                  for s in a["sources"]),
            snr(a["snr_db"]), float(a["duration"]), self.seed))

    @property
    def classifier(self):
        return self.data["classifier"]

    @property
    def dataset(self):
        return self.data["dataset"]
