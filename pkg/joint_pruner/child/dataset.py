"""
Image classification data for the child network.

`synthetic_shapes` renders greyscale disks, bars and crosses at random
position, size, orientation and noise level. `save_dataset`/`load_dataset`
read and write the ABCPDATA binary container:

    magic  b"ABCPDATA"
    u32    version, n_train, n_test, channels, height, width, num_classes  (little-endian)
    u8     train pixels (n_train * C * H * W), train labels (n_train)
    u8     test pixels, test labels

next to a `manifest.json` describing the same numbers.
"""
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import InvalidArgumentError, VersionMismatchError

logger = logging.getLogger(__name__)

MAGIC = b"ABCPDATA"
CONTAINER_VERSION = 1
DATA_FILE = "data.bin"
MANIFEST_FILE = "manifest.json"
SHAPE_CLASSES = ("disk", "bar", "cross")

_HEADER = np.dtype("<u4")
_HEADER_FIELDS = 7


@dataclass(frozen=True)
class Split:
    images: np.ndarray
    labels: np.ndarray

    def __post_init__(self) -> None:
        if self.images.dtype != np.uint8 or self.images.ndim != 4:
            raise InvalidArgumentError("images must be a uint8 array shaped (N, C, H, W)")
        if self.labels.shape != (self.images.shape[0],):
            raise InvalidArgumentError("need exactly one label per image")

    def __len__(self) -> int:
        return self.images.shape[0]

    def inputs(self) -> np.ndarray:
        return self.images.astype(np.float64) / 255.0

    def subset(self, indices: np.ndarray) -> "Split":
        return Split(self.images[indices], self.labels[indices])


@dataclass(frozen=True)
class Dataset:
    train: Split
    test: Split
    num_classes: int
    class_names: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        for name, split in (("train", self.train), ("test", self.test)):
            if len(split) and int(split.labels.max()) >= self.num_classes:
                raise InvalidArgumentError(f"{name} labels exceed class count {self.num_classes}")

    @property
    def image_shape(self) -> tuple[int, int, int]:
        return tuple(self.train.images.shape[1:])


def _render(kind: int, size: int, rng: np.random.Generator) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    cx, cy = rng.uniform(0.3, 0.7, size=2) * size
    radius = rng.uniform(0.18, 0.32) * size
    theta = rng.uniform(0.0, np.pi)
    u = (xx - cx) * np.cos(theta) + (yy - cy) * np.sin(theta)
    v = -(xx - cx) * np.sin(theta) + (yy - cy) * np.cos(theta)
    half_width = 0.22 * radius

    if SHAPE_CLASSES[kind] == "disk":
        shape = (xx - cx) ** 2 + (yy - cy) ** 2 <= radius ** 2
    elif SHAPE_CLASSES[kind] == "bar":
        shape = (np.abs(u) <= radius) & (np.abs(v) <= half_width)
    else:
        shape = ((np.abs(u) <= radius) & (np.abs(v) <= half_width)) | ((np.abs(v) <= radius) & (np.abs(u) <= half_width))

    background = rng.uniform(10.0, 60.0)
    foreground = rng.uniform(170.0, 240.0)
    noise = rng.normal(0.0, rng.uniform(5.0, 20.0), size=(size, size))
    image = np.where(shape, foreground, background) + noise
    return np.clip(np.rint(image), 0, 255).astype(np.uint8)


def _render_split(count: int, size: int, rng: np.random.Generator) -> Split:
    labels = np.arange(count) % len(SHAPE_CLASSES)
    labels = labels[rng.permutation(count)]
    images = np.empty((count, 1, size, size), dtype=np.uint8)
    for i, kind in enumerate(labels):
        images[i, 0] = _render(int(kind), size, rng)
    return Split(images, labels.astype(np.int64))


def synthetic_shapes(train_samples: int, test_samples: int, image_size: int = 32, seed: int = 0) -> Dataset:
    """Balanced three-class shape images, fully determined by `seed`."""
    if train_samples < 1 or test_samples < 1 or image_size < 8:
        raise InvalidArgumentError("need at least one sample per split and images of at least 8x8")
    rng = np.random.default_rng(seed)
    train = _render_split(train_samples, image_size, rng)
    test = _render_split(test_samples, image_size, rng)
    logger.info(f"Rendered {train_samples} train / {test_samples} test shape images at {image_size}x{image_size}")
    return Dataset(train, test, len(SHAPE_CLASSES), SHAPE_CLASSES)


def save_dataset(data: Dataset, directory: str | Path) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    channels, height, width = data.image_shape
    header = np.array(
        [CONTAINER_VERSION, len(data.train), len(data.test), channels, height, width, data.num_classes],
        dtype=_HEADER,
    )
    with open(directory / DATA_FILE, "wb") as f:
        f.write(MAGIC)
        f.write(header.tobytes())
        for split in (data.train, data.test):
            f.write(np.ascontiguousarray(split.images).tobytes())
            f.write(split.labels.astype(np.uint8).tobytes())

    manifest = {
        "format": MAGIC.decode("ascii"),
        "version": CONTAINER_VERSION,
        "file": DATA_FILE,
        "train": len(data.train),
        "test": len(data.test),
        "channels": channels,
        "height": height,
        "width": width,
        "num_classes": data.num_classes,
        "class_names": list(data.class_names),
    }
    with open(directory / MANIFEST_FILE, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2)
    return directory


def load_dataset(directory: str | Path) -> Dataset:
    directory = Path(directory)
    with open(directory / MANIFEST_FILE, "r", encoding="utf-8") as f:
        manifest = json.load(f)
    if manifest.get("format") != MAGIC.decode("ascii") or manifest.get("version") != CONTAINER_VERSION:
        raise VersionMismatchError(f"{MAGIC.decode('ascii')} v{CONTAINER_VERSION}", manifest.get("version"))

    raw = (directory / manifest.get("file", DATA_FILE)).read_bytes()
    if raw[:len(MAGIC)] != MAGIC:
        raise VersionMismatchError(MAGIC.decode("ascii"), raw[:len(MAGIC)])
    offset = len(MAGIC)
    if len(raw) < offset + _HEADER.itemsize * _HEADER_FIELDS:
        raise InvalidArgumentError(f"{DATA_FILE} is truncated inside its header")
    header = np.frombuffer(raw, dtype=_HEADER, count=_HEADER_FIELDS, offset=offset)
    version, n_train, n_test, channels, height, width, num_classes = (int(v) for v in header)
    if version != CONTAINER_VERSION:
        raise VersionMismatchError(str(CONTAINER_VERSION), version)
    offset += _HEADER.itemsize * _HEADER_FIELDS

    splits = []
    pixels = channels * height * width
    for count in (n_train, n_test):
        needed = count * pixels + count
        if offset + needed > len(raw):
            raise InvalidArgumentError(f"{DATA_FILE} is truncated")
        images = np.frombuffer(raw, dtype=np.uint8, count=count * pixels, offset=offset)
        offset += count * pixels
        labels = np.frombuffer(raw, dtype=np.uint8, count=count, offset=offset)
        offset += count
        splits.append(Split(images.reshape(count, channels, height, width).copy(), labels.astype(np.int64)))

    return Dataset(splits[0], splits[1], num_classes, tuple(manifest.get("class_names", ())))
