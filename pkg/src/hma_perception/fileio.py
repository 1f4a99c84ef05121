"""On-disk formats: ASCII clouds, binary PPM/PGM, 16-bit PCM WAV, datasets and models.

Cloud file layout::

    HMACLOUD 1
    width <W>
    height <H>
    x y z valid r g b        <- one record per pixel, row-major, W*H lines

Coordinates are written with 9 significant digits, which reproduces any
float32 value exactly; that is the precision of clouds on disk.
"""

import json
import os
import struct
from pathlib import Path

import numpy as np

from .classifier import ColorHistogramClassifier, Dataset, LabeledImage
from .cloud import OrganizedCloud
from .errors import ParseError
from .localization import MultichannelSignal

CLOUD_MAGIC = "HMACLOUD 1"


def write_cloud(path, cloud):
    with open(path, "w", newline="\n") as fh:
        fh.write(f"{CLOUD_MAGIC}\nwidth {cloud.width}\nheight {cloud.height}\n")
        pts = np.where(cloud.valid[:, None], cloud.points, 0.0)
        for p, ok, c in zip(pts.tolist(), cloud.valid.tolist(), cloud.rgb.tolist()):
            fh.write(f"{p[0]:.9g} {p[1]:.9g} {p[2]:.9g} {int(ok)} {c[0]} {c[1]} {c[2]}\n")


def _header_int(line, key, lineno, path):
    parts = line.split()
    if len(parts) != 2 or parts[0] != key:
        raise ParseError(f"expected '{key} <int>'", f"line {lineno}", path)
    try:
        v = int(parts[1])
    except ValueError:
        raise ParseError(f"bad {key} {parts[1]!r}", f"line {lineno}", path) from None
    if v <= 0:
        raise ParseError(f"{key} must be positive", f"line {lineno}", path)
    return v


def _parse_records_fast(records, n):
    """Vectorized parse; ``None`` if anything looks off (the slow path then locates the error)."""
    tokens = " ".join(records).split()
    if len(tokens) != 7 * n:
        return None
    try:
        arr = np.array(tokens, dtype=np.float64).reshape(n, 7)
    except ValueError:
        return None
    flags, col = arr[:, 3], arr[:, 4:]
    if not (np.all((flags == 0) | (flags == 1)) and np.all((col >= 0) & (col <= 255))
            and np.all(col == np.floor(col))):
        return None
    valid = flags == 1
    if not np.all(np.isfinite(arr[valid, :3])):
        return None
    if any(len(r.split()) != 7 for r in records):
        return None
    return arr[:, :3], valid, col.astype(np.uint8)


def read_cloud(path):
    with open(path, "r") as fh:
        lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0].strip() != CLOUD_MAGIC:
        raise ParseError(f"missing magic {CLOUD_MAGIC!r}", "line 1", path)
    if len(lines) < 3:
        raise ParseError("truncated header", f"line {len(lines) + 1}", path)
    w = _header_int(lines[1], "width", 2, path)
    h = _header_int(lines[2], "height", 3, path)
    records = lines[3:]
    if len(records) != w * h:
        raise ParseError(f"expected {w * h} point records, found {len(records)}",
                         f"line {3 + min(len(records), w * h) + 1}", path)
    fast = _parse_records_fast(records, w * h)
    if fast is not None:
        return OrganizedCloud(w, h, *fast)
    pts = np.empty((w * h, 3))
    valid = np.empty(w * h, dtype=bool)
    rgb = np.empty((w * h, 3), dtype=np.uint8)
    for i, line in enumerate(records):
        f = line.split()
        where = f"line {i + 4}"
        if len(f) != 7:
            raise ParseError(f"expected 7 fields, got {len(f)}", where, path)
        try:
            xyz = [float(v) for v in f[:3]]
            flag = int(f[3])
            col = [int(v) for v in f[4:]]
        except ValueError as e:
            raise ParseError(str(e), where, path) from None
        if flag not in (0, 1):
            raise ParseError(f"valid flag must be 0 or 1, got {flag}", where, path)
        if any(not 0 <= c <= 255 for c in col):
            raise ParseError("rgb out of range 0..255", where, path)
        if flag and not all(np.isfinite(xyz)):
            raise ParseError("valid point is not finite", where, path)
        pts[i], valid[i], rgb[i] = xyz, bool(flag), col
    return OrganizedCloud(w, h, pts, valid, rgb)


def _read_netpbm(path, magic, channels):
    data = Path(path).read_bytes()
    pos = 0
    tokens = []
    while len(tokens) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise ParseError("truncated header", f"offset {pos}", path)
        tokens.append((data[start:pos], start))
    if tokens[0][0] != magic:
        raise ParseError(f"expected magic {magic.decode()}", "offset 0", path)
    vals = []
    for tok, off in tokens[1:]:
        try:
            vals.append(int(tok))
        except ValueError:
            raise ParseError(f"bad header field {tok!r}", f"offset {off}", path) from None
    w, h, maxval = vals
    if w <= 0 or h <= 0:
        raise ParseError("image dimensions must be positive", f"offset {tokens[1][1]}", path)
    if maxval != 255:
        raise ParseError(f"only maxval 255 is supported, got {maxval}", f"offset {tokens[3][1]}", path)
    if pos >= len(data) or not data[pos:pos + 1].isspace():
        raise ParseError("missing whitespace after header", f"offset {pos}", path)
    pos += 1
    need = w * h * channels
    if len(data) - pos < need:
        raise ParseError(f"pixel data truncated: need {need} bytes, have {len(data) - pos}",
                         f"offset {len(data)}", path)
    px = np.frombuffer(data, dtype=np.uint8, count=need, offset=pos)
    return px.reshape(h, w, channels) if channels > 1 else px.reshape(h, w)


def read_ppm(path):
    return _read_netpbm(path, b"P6", 3).copy()


def read_pgm(path):
    return _read_netpbm(path, b"P5", 1).copy()


def write_ppm(path, pixels):
    px = np.ascontiguousarray(pixels, dtype=np.uint8)
    if px.ndim != 3 or px.shape[2] != 3:
        raise ValueError(f"PPM needs (h, w, 3) pixels, got {px.shape}")
    with open(path, "wb") as fh:
        fh.write(b"P6\n%d %d\n255\n" % (px.shape[1], px.shape[0]))
        fh.write(px.tobytes())


def write_pgm(path, pixels):
    px = np.ascontiguousarray(pixels, dtype=np.uint8)
    if px.ndim != 2:
        raise ValueError(f"PGM needs (h, w) pixels, got {px.shape}")
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (px.shape[1], px.shape[0]))
        fh.write(px.tobytes())


def quantize_pcm16(x):
    """Float samples (full scale 1.0) to int16 with rounding and clipping."""
    return np.clip(np.floor(np.asarray(x, dtype=np.float64) * 32768.0 + 0.5), -32768, 32767).astype(np.int16)


def write_wav(path, signal):
    """Interleaved 16-bit PCM; samples are clipped to ``[-1, 1)`` full scale."""
    pcm = quantize_pcm16(signal.channels).T.astype("<i2")
    c = signal.n_channels
    rate = int(round(signal.sample_rate))
    body = pcm.tobytes()
    fmt = struct.pack("<HHIIHH", 1, c, rate, rate * c * 2, c * 2, 16)
    with open(path, "wb") as fh:
        fh.write(b"RIFF" + struct.pack("<I", 4 + 8 + len(fmt) + 8 + len(body)) + b"WAVE")
        fh.write(b"fmt " + struct.pack("<I", len(fmt)) + fmt)
        fh.write(b"data" + struct.pack("<I", len(body)) + body)


def read_wav(path):
    """16-bit PCM WAV (plain or WAVE_FORMAT_EXTENSIBLE) as float samples in ``[-1, 1)``."""
    data = Path(path).read_bytes()
    if len(data) < 12:
        raise ParseError("truncated RIFF header", f"offset {len(data)}", path)
    if data[0:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise ParseError("not a RIFF/WAVE file", "offset 0", path)
    pos = 12
    fmt = None
    while pos + 8 <= len(data):
        cid = data[pos:pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        start = pos + 8
        if cid == b"fmt ":
            if size < 16 or start + 16 > len(data):
                raise ParseError("truncated fmt chunk", f"offset {min(start + 16, len(data))}", path)
            tag, c, rate, _, align, bits = struct.unpack_from("<HHIIHH", data, start)
            if tag == 0xFFFE and size >= 40:
                tag = struct.unpack_from("<H", data, start + 24)[0]
            if tag != 1 or bits != 16:
                raise ParseError(f"only 16-bit PCM is supported (format {tag}, {bits} bits)",
                                 f"offset {start}", path)
            if c < 1 or align != 2 * c:
                raise ParseError("inconsistent channel count / block align", f"offset {start + 2}", path)
            fmt = (c, rate)
        elif cid == b"data":
            if fmt is None:
                raise ParseError("data chunk before fmt chunk", f"offset {pos}", path)
            c, rate = fmt
            if start + size > len(data):
                raise ParseError(f"data chunk truncated: declares {size} bytes",
                                 f"offset {len(data)}", path)
            if size % (2 * c):
                raise ParseError("data size is not a whole number of frames", f"offset {pos + 4}", path)
            pcm = np.frombuffer(data, dtype="<i2", count=size // 2, offset=start)
            chans = pcm.reshape(-1, c).T.astype(np.float64) / 32768.0
            return MultichannelSignal(chans, float(rate))
        pos = start + size + (size & 1)
    raise ParseError("no data chunk" if fmt else "truncated header: no fmt chunk",
                     f"offset {min(pos, len(data))}", path)


def load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as e:
        raise ParseError(e.msg, f"line {e.lineno} column {e.colno}", path) from None


def dump_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


MANIFEST = "manifest.json"


def write_dataset(directory, ds):
    """One sub-directory per class holding PPM images, plus ``manifest.json``."""
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    counters = [0] * len(ds.classes)
    entries = []
    for im in ds.images:
        name = ds.classes[im.label]
        (root / name).mkdir(exist_ok=True)
        rel = f"{name}/{counters[im.label]:05d}.ppm"
        counters[im.label] += 1
        write_ppm(root / rel, im.pixels)
        entries.append({"file": rel, "label": name, "view_angle": im.view_angle})
    dump_json(root / MANIFEST, {"classes": list(ds.classes), "images": entries})


def read_dataset(directory):
    root = Path(directory)
    man = load_json(root / MANIFEST)
    if not isinstance(man, dict) or set(man) != {"classes", "images"}:
        raise ParseError("manifest needs exactly 'classes' and 'images'", None, root / MANIFEST)
    classes = list(man["classes"])
    images = []
    for i, e in enumerate(man["images"]):
        if e.get("label") not in classes:
            raise ParseError(f"unknown label {e.get('label')!r}", f"images[{i}]", root / MANIFEST)
        px = read_ppm(root / e["file"])
        images.append(LabeledImage(px, classes.index(e["label"]), e.get("view_angle")))
    return Dataset(classes, images)


def save_model(path, model):
    dump_json(path, model.to_dict())


def load_model(path):
    d = load_json(path)
    if d.get("kind") != "color_histogram":
        raise ParseError(f"unknown model kind {d.get('kind')!r}", "kind", path)
    return ColorHistogramClassifier.from_dict(d)


def ensure_parent(path):
    parent = os.path.dirname(os.fspath(path))
    if parent:
        os.makedirs(parent, exist_ok=True)
