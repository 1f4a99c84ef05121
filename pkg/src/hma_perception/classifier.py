"""Object-image classification harness.

Covers the image contract (224x224 RGB, 8 bit), brightness augmentation,
a pluggable classifier interface with a color-histogram nearest-centroid
baseline, and per-class True/False evaluation tables.
"""

import math
from dataclasses import dataclass, field
from typing import List, Optional, Protocol, Sequence, Tuple

import numpy as np

from .errors import EmptyClass, EmptyImage, EmptyTestSet, UntrainedModel, WrongShape
from .rng import Xoshiro256StarStar

INPUT_SIZE = 224
BRIGHTNESS_FACTORS = (0.9, 1.0, 1.1)


@dataclass(eq=False)
class LabeledImage:
    pixels: np.ndarray  # (h, w, 3) uint8
    label: int
    view_angle: Optional[float] = None

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.uint8)


@dataclass(eq=False)
class Dataset:
    classes: List[str]
    images: List[LabeledImage] = field(default_factory=list)

    def __post_init__(self):
        if not self.classes:
            raise ValueError("dataset needs at least one class")
        for im in self.images:
            if not 0 <= im.label < len(self.classes):
                raise ValueError(f"label {im.label} out of range")

    def __len__(self):
        return len(self.images)

    def counts(self):
        c = [0] * len(self.classes)
        for im in self.images:
            c[im.label] += 1
        return c


def bilinear_resize(pixels, out_h, out_w):
    """Half-pixel-centre bilinear resize of an ``(h, w, c)`` uint8 image."""
    src = np.asarray(pixels, dtype=np.float64)
    h, w = src.shape[:2]

    def axis(n_out, n_in):
        s = (np.arange(n_out) + 0.5) * n_in / n_out - 0.5
        s = np.clip(s, 0, n_in - 1)
        i0 = np.floor(s).astype(np.int64)
        i1 = np.minimum(i0 + 1, n_in - 1)
        return i0, i1, s - i0

    y0, y1, wy = axis(out_h, h)
    x0, x1, wx = axis(out_w, w)
    wy = wy[:, None, None]
    wx = wx[None, :, None]
    top = src[y0][:, x0] * (1 - wx) + src[y0][:, x1] * wx
    bot = src[y1][:, x0] * (1 - wx) + src[y1][:, x1] * wx
    out = top * (1 - wy) + bot * wy
    return np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)


def preprocess(img):
    """Resize a :class:`LabeledImage` (or bare pixel array) to 224x224x3 uint8."""
    px = img.pixels if isinstance(img, LabeledImage) else np.asarray(img, dtype=np.uint8)
    if px.ndim != 3 or px.shape[2] != 3:
        raise WrongShape(f"expected an RGB image, got shape {px.shape}")
    if px.shape[0] < 1 or px.shape[1] < 1:
        raise EmptyImage("image has no pixels")
    if px.shape[:2] == (INPUT_SIZE, INPUT_SIZE):
        return px.copy()
    return bilinear_resize(px, INPUT_SIZE, INPUT_SIZE)


def scale_brightness(pixels, factor):
    """``v -> clamp(round_half_away(v * factor), 0, 255)`` per channel."""
    v = np.asarray(pixels, dtype=np.float64) * factor
    return np.clip(np.floor(v + 0.5), 0, 255).astype(np.uint8)


def augment_brightness(ds, factors=BRIGHTNESS_FACTORS):
    """One copy of the dataset per factor, concatenated in factor order."""
    out = []
    for f in factors:
        out.extend(LabeledImage(scale_brightness(im.pixels, f), im.label, im.view_angle)
                   for im in ds.images)
    return Dataset(list(ds.classes), out)


def make_view_protocol(n_views, step_degrees):
    if n_views < 1:
        raise ValueError("n_views must be at least 1")
    return [i * float(step_degrees) for i in range(n_views)]


def split(ds, n_train, seed):
    """Stratified train/test split: ``n_train`` images per class go to training.

    Each class's images are shuffled with a seeded Fisher-Yates pass; both
    halves keep the dataset's original ordering.
    """
    rng = Xoshiro256StarStar(seed)
    train_idx = []
    for c in range(len(ds.classes)):
        members = [i for i, im in enumerate(ds.images) if im.label == c]
        if len(members) < n_train:
            raise ValueError(f"class {ds.classes[c]!r} has only {len(members)} images")
        for i in range(len(members) - 1, 0, -1):
            j = rng.randbelow(i + 1)
            members[i], members[j] = members[j], members[i]
        train_idx.extend(members[:n_train])
    chosen = set(train_idx)
    train = [im for i, im in enumerate(ds.images) if i in chosen]
    test = [im for i, im in enumerate(ds.images) if i not in chosen]
    return Dataset(list(ds.classes), train), Dataset(list(ds.classes), test)


class ClassifierModel(Protocol):
    classes: List[str]

    def train(self, ds: Dataset) -> "ClassifierModel": ...

    def classify(self, image: np.ndarray) -> Tuple[int, float]: ...


def color_histogram(pixels, bins=8):
    """Joint RGB histogram with ``bins`` levels per channel, normalized to sum 1."""
    px = np.asarray(pixels, dtype=np.uint8).reshape(-1, 3).astype(np.int64)
    q = px * bins // 256
    flat = (q[:, 0] * bins + q[:, 1]) * bins + q[:, 2]
    h = np.bincount(flat, minlength=bins ** 3).astype(np.float64)
    return h / px.shape[0]


class ColorHistogramClassifier:
    """Nearest class-mean color histogram under L2 distance."""

    def __init__(self, bins=8):
        self.bins = bins
        self.classes = None
        self.centroids = None

    def train(self, ds):
        sums = np.zeros((len(ds.classes), self.bins ** 3))
        counts = np.zeros(len(ds.classes), dtype=np.int64)
        for im in ds.images:
            sums[im.label] += color_histogram(preprocess(im), self.bins)
            counts[im.label] += 1
        empty = [ds.classes[i] for i in np.flatnonzero(counts == 0)]
        if empty:
            raise EmptyClass(f"no training images for {empty}")
        self.classes = list(ds.classes)
        self.centroids = sums / counts[:, None]
        return self

    def distances(self, image):
        if self.centroids is None:
            raise UntrainedModel("classifier has not been trained")
        image = np.asarray(image)
        if image.shape != (INPUT_SIZE, INPUT_SIZE, 3):
            raise WrongShape(f"expected (224, 224, 3), got {image.shape}")
        h = color_histogram(image, self.bins)
        return np.sqrt(((self.centroids - h) ** 2).sum(axis=1))

    def classify(self, image):
        d = self.distances(image)
        best = int(np.argmin(d))
        return best, 1.0 / (1.0 + float(d[best]))

    def to_dict(self):
        if self.centroids is None:
            raise UntrainedModel("classifier has not been trained")
        return {
            "kind": "color_histogram",
            "bins": self.bins,
            "classes": self.classes,
            "centroids": [[float(x) for x in row] for row in self.centroids],
        }

    @classmethod
    def from_dict(cls, d):
        m = cls(int(d["bins"]))
        m.classes = list(d["classes"])
        m.centroids = np.asarray(d["centroids"], dtype=np.float64)
        if m.centroids.shape != (len(m.classes), m.bins ** 3):
            raise ValueError("centroid table does not match classes/bins")
        return m


@dataclass
class ConfusionTable:
    classes: List[str]
    true: List[int]
    false: List[int]
    matrix: np.ndarray  # rows: true class (test order), cols: predicted model class

    @property
    def n_classes(self):
        return len(self.classes)

    @property
    def trials(self):
        return [t + f for t, f in zip(self.true, self.false)]

    @property
    def accuracy(self):
        """Exact accuracy in percent."""
        total = sum(self.trials)
        if total == 0:
            raise EmptyTestSet("no test images")
        return 100.0 * sum(self.true) / total

    @property
    def accuracy_display(self):
        return int(math.floor(self.accuracy + 0.5))


def tally(test_classes, model_classes, truth, predicted):
    """Confusion table from per-image true test labels and predicted model labels."""
    n = len(test_classes)
    true, false = [0] * n, [0] * n
    matrix = np.zeros((n, len(model_classes)), dtype=np.int64)
    for t, p in zip(truth, predicted):
        matrix[t, p] += 1
        if model_classes[p] == test_classes[t]:
            true[t] += 1
        else:
            false[t] += 1
    return ConfusionTable(list(test_classes), true, false, matrix)


def evaluate(model, test, classes: Optional[Sequence[str]] = None):
    """Classify every test image and tally per-class outcomes.

    ``classes`` restricts evaluation to a subset of the test classes (in the
    given order), mirroring an evaluation on part of the trained object set.
    """
    missing = [c for c in test.classes if c not in model.classes]
    if missing:
        raise ValueError(f"test classes unknown to the model: {missing}")
    keep = list(test.classes) if classes is None else list(classes)
    remap = {test.classes.index(c): i for i, c in enumerate(keep)}
    truth, predicted = [], []
    for im in test.images:
        if im.label not in remap:
            continue
        label, _ = model.classify(preprocess(im))
        truth.append(remap[im.label])
        predicted.append(label)
    if not truth:
        raise EmptyTestSet("no test images")
    return tally(keep, model.classes, truth, predicted)
