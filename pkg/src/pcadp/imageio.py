"""Image and dataset codecs: IDX files, binary PGM/PPM, flatten/reshape.

Pixel layout convention: an Image stores 8-bit intensities channel-planar
(all of channel 0 row-major, then channel 1, ...). Grayscale images have
one plane; color images have three (R, G, B). PPM files on disk keep the
standard interleaved sample order; the codec converts.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CodecError, FormatError, HeterogeneityError, RejectedInput

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801


@dataclass(frozen=True)
class Image:
    """Fixed-size 8-bit image; pixels are channel-planar, row-major per plane."""

    width: int
    height: int
    channels: int
    pixels: np.ndarray

    def __post_init__(self):
        if self.channels not in (1, 3):
            raise RejectedInput(f"channels must be 1 or 3, got {self.channels}")
        if self.width < 1 or self.height < 1:
            raise RejectedInput(f"bad dimensions {self.width}x{self.height}")
        arr = np.asarray(self.pixels)
        if arr.dtype != np.uint8:
            if not np.issubdtype(arr.dtype, np.integer):
                raise RejectedInput(f"pixels must be 8-bit integers, got dtype {arr.dtype}")
            if arr.size and (arr.min() < 0 or arr.max() > 255):
                raise RejectedInput("pixel intensities must lie in [0, 255]")
            arr = arr.astype(np.uint8)
        arr = np.ascontiguousarray(arr).reshape(-1)
        expected = self.width * self.height * self.channels
        if arr.size != expected:
            raise RejectedInput(
                f"pixel count {arr.size} != width*height*channels = {expected}"
            )
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.width, self.height, self.channels)

    def plane(self, c: int) -> np.ndarray:
        """Channel plane c as a (height, width) view."""
        size = self.width * self.height
        return self.pixels[c * size : (c + 1) * size].reshape(self.height, self.width)


@dataclass(frozen=True)
class ImageDatabase:
    """Ordered, shape-homogeneous images with integer labels into class_names."""

    images: tuple[Image, ...]
    labels: tuple[int, ...]
    class_names: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "images", tuple(self.images))
        object.__setattr__(self, "labels", tuple(int(l) for l in self.labels))
        object.__setattr__(self, "class_names", tuple(str(c) for c in self.class_names))
        if not self.images:
            raise RejectedInput("database must hold at least one image")
        if len(self.labels) != len(self.images):
            raise RejectedInput(
                f"{len(self.labels)} labels for {len(self.images)} images"
            )
        shape = self.images[0].shape
        offenders = [i for i, img in enumerate(self.images) if img.shape != shape]
        if offenders:
            raise HeterogeneityError("images disagree on shape", offenders)
        for lab in self.labels:
            if not 0 <= lab < len(self.class_names):
                raise RejectedInput(f"label {lab} outside class list")

    @property
    def n(self) -> int:
        return len(self.images)

    @property
    def width(self) -> int:
        return self.images[0].width

    @property
    def height(self) -> int:
        return self.images[0].height

    @property
    def channels(self) -> int:
        return self.images[0].channels

    def subset(self, indices) -> "ImageDatabase":
        idx = list(indices)
        return ImageDatabase(
            images=tuple(self.images[i] for i in idx),
            labels=tuple(self.labels[i] for i in idx),
            class_names=self.class_names,
        )


def flatten(img: Image) -> np.ndarray:
    """Image as a float64 attribute vector (channel-planar, row-major)."""
    return img.pixels.astype(np.float64)


def unflatten(vector, width: int, height: int, channels: int = 1) -> Image:
    """Inverse of flatten, with quantization: clamp to [0, 255], round half-up."""
    v = np.asarray(vector, dtype=np.float64).reshape(-1)
    expected = width * height * channels
    if v.size != expected:
        raise RejectedInput(f"vector length {v.size} != {width}x{height}x{channels}")
    if not np.all(np.isfinite(v)):
        raise RejectedInput("vector contains NaN or Inf")
    quantized = np.floor(np.clip(v, 0.0, 255.0) + 0.5).astype(np.uint8)
    return Image(width=width, height=height, channels=channels, pixels=quantized)


def flatten_database(db: ImageDatabase, indices=None) -> np.ndarray:
    """Stack flattened images (optionally a subset) into an n x s matrix."""
    images = db.images if indices is None else [db.images[i] for i in indices]
    return np.stack([flatten(img) for img in images])


def _read_be_u32(data: bytes, offset: int, field: str, path) -> int:
    if offset + 4 > len(data):
        raise FormatError(
            "file ends inside header", path=path, field=field, offset=len(data)
        )
    return struct.unpack_from(">I", data, offset)[0]


def load_idx(images_path, labels_path) -> ImageDatabase:
    """Read an IDX image/label file pair (big-endian, MNIST layout).

    Image files carry magic 0x00000803 and dims (count, rows, cols);
    label files carry magic 0x00000801 and a count. Counts must match and
    payloads must be exact; anything else is a FormatError naming the
    offending field and byte offset.
    """
    img_data = Path(images_path).read_bytes()
    magic = _read_be_u32(img_data, 0, "magic", images_path)
    if magic != IDX_IMAGE_MAGIC:
        raise FormatError(
            f"bad image magic 0x{magic:08x}, expected 0x{IDX_IMAGE_MAGIC:08x}",
            path=images_path,
            field="magic",
            offset=0,
        )
    count = _read_be_u32(img_data, 4, "count", images_path)
    rows = _read_be_u32(img_data, 8, "rows", images_path)
    cols = _read_be_u32(img_data, 12, "cols", images_path)
    expected = count * rows * cols
    actual = len(img_data) - 16
    if actual != expected:
        kind = "truncated" if actual < expected else "oversized"
        raise FormatError(
            f"{kind} pixel payload: expected {expected} bytes, found {actual}",
            path=images_path,
            field="pixel data",
            offset=16 + min(actual, expected),
        )

    lab_data = Path(labels_path).read_bytes()
    lab_magic = _read_be_u32(lab_data, 0, "magic", labels_path)
    if lab_magic != IDX_LABEL_MAGIC:
        raise FormatError(
            f"bad label magic 0x{lab_magic:08x}, expected 0x{IDX_LABEL_MAGIC:08x}",
            path=labels_path,
            field="magic",
            offset=0,
        )
    lab_count = _read_be_u32(lab_data, 4, "count", labels_path)
    lab_actual = len(lab_data) - 8
    if lab_actual != lab_count:
        kind = "truncated" if lab_actual < lab_count else "oversized"
        raise FormatError(
            f"{kind} label payload: expected {lab_count} bytes, found {lab_actual}",
            path=labels_path,
            field="label data",
            offset=8 + min(lab_actual, lab_count),
        )
    if lab_count != count:
        raise FormatError(
            f"label count {lab_count} != image count {count}",
            path=labels_path,
            field="count",
            offset=4,
        )

    pixels = np.frombuffer(img_data, dtype=np.uint8, offset=16)
    labels = np.frombuffer(lab_data, dtype=np.uint8, offset=8)
    bad = np.nonzero(labels > 9)[0]
    if bad.size:
        raise FormatError(
            f"label value {labels[bad[0]]} outside 0-9",
            path=labels_path,
            field="label",
            offset=8 + int(bad[0]),
        )
    size = rows * cols
    images = tuple(
        Image(width=cols, height=rows, channels=1, pixels=pixels[i * size : (i + 1) * size])
        for i in range(count)
    )
    return ImageDatabase(
        images=images,
        labels=tuple(int(l) for l in labels),
        class_names=tuple(str(i) for i in range(10)),
    )


def save_pgm(img: Image, path) -> None:
    """Write a binary PGM (P5, maxval 255)."""
    if img.channels != 1:
        raise FormatError(f"PGM requires 1 channel, image has {img.channels}", path=path)
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + img.pixels.tobytes())


def save_ppm(img: Image, path) -> None:
    """Write a binary PPM (P6, maxval 255); planes are interleaved on disk."""
    if img.channels != 3:
        raise FormatError(f"PPM requires 3 channels, image has {img.channels}", path=path)
    header = f"P6\n{img.width} {img.height}\n255\n".encode("ascii")
    interleaved = img.pixels.reshape(3, -1).T.reshape(-1)
    Path(path).write_bytes(header + interleaved.tobytes())


def _parse_netpbm(data: bytes, path):
    """Parse a P5/P6 header; returns (channels, width, height, payload offset).

    Accepts standard netpbm whitespace and '#' comments in the header.
    Maxval must be 255 (8-bit only).
    """
    if data[:2] == b"P5":
        channels = 1
    elif data[:2] == b"P6":
        channels = 3
    else:
        raise FormatError(
            f"unsupported magic {data[:2]!r}", path=path, field="magic", offset=0
        )
    pos = 2
    fields = []
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] not in (0x0A, 0x0D):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        token = data[start:pos]
        if not token.isdigit():
            raise FormatError(
                f"expected integer header field, got {token!r}",
                path=path,
                field=("width", "height", "maxval")[len(fields)],
                offset=start,
            )
        fields.append(int(token))
    width, height, maxval = fields
    if maxval != 255:
        raise FormatError(
            f"unsupported maxval {maxval}, only 255", path=path, field="maxval", offset=pos
        )
    # Exactly one whitespace byte separates maxval from the raw samples.
    pos += 1
    expected = width * height * channels
    if len(data) - pos != expected:
        raise FormatError(
            f"payload is {len(data) - pos} bytes, expected {expected}",
            path=path,
            field="pixel data",
            offset=pos,
        )
    return channels, width, height, pos


def load_image(path) -> Image:
    """Load a binary PGM or PPM file."""
    data = Path(path).read_bytes()
    channels, width, height, pos = _parse_netpbm(data, path)
    raw = np.frombuffer(data, dtype=np.uint8, offset=pos)
    if channels == 3:
        raw = raw.reshape(-1, 3).T.reshape(-1)  # interleaved -> planar
    return Image(width=width, height=height, channels=channels, pixels=raw)


def load_pgm(path) -> Image:
    img = load_image(path)
    if img.channels != 1:
        raise FormatError("not a PGM file", path=path, field="magic", offset=0)
    return img


def load_ppm(path) -> Image:
    img = load_image(path)
    if img.channels != 3:
        raise FormatError("not a PPM file", path=path, field="magic", offset=0)
    return img


def save_image(img: Image, path) -> None:
    """Dispatch to save_pgm or save_ppm on the image's channel count."""
    if img.channels == 1:
        save_pgm(img, path)
    else:
        save_ppm(img, path)


def resize_nearest(img: Image, new_width: int, new_height: int) -> Image:
    """Nearest-neighbor resample, per channel plane."""
    if new_width < 1 or new_height < 1:
        raise RejectedInput(f"bad target size {new_width}x{new_height}")
    src_rows = (np.arange(new_height) * img.height) // new_height
    src_cols = (np.arange(new_width) * img.width) // new_width
    planes = [img.plane(c)[np.ix_(src_rows, src_cols)] for c in range(img.channels)]
    return Image(
        width=new_width,
        height=new_height,
        channels=img.channels,
        pixels=np.concatenate([p.reshape(-1) for p in planes]),
    )


def load_image_dir(dir_path, manifest_path, resize=None) -> ImageDatabase:
    """Load a folder of PGM/PPM images listed in a manifest.

    The manifest holds one "filename,label" per line ('#' comments and
    blank lines allowed). Database order is lexicographic by filename so
    it is stable across platforms, regardless of manifest line order.
    `resize` optionally downsamples every image to (width, height) with
    nearest-neighbor before the homogeneity check.
    """
    dir_path = Path(dir_path)
    entries: dict[str, str] = {}
    for lineno, line in enumerate(Path(manifest_path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        name, sep, label = line.partition(",")
        name = name.strip()
        label = label.strip()
        if not sep or not name or not label:
            raise FormatError(
                f"manifest line {lineno} is not 'filename,label': {line!r}",
                path=manifest_path,
                field="entry",
            )
        if name in entries:
            raise FormatError(
                f"duplicate manifest entry for {name!r}",
                path=manifest_path,
                field="entry",
            )
        entries[name] = label

    if not entries:
        raise RejectedInput(f"manifest {manifest_path} lists no images")

    names = sorted(entries)
    images = []
    for name in names:
        try:
            img = load_image(dir_path / name)
        except FormatError as exc:
            raise CodecError(f"cannot decode {name!r}: {exc}", path=dir_path / name) from exc
        if resize is not None:
            img = resize_nearest(img, resize[0], resize[1])
        images.append(img)

    shape = images[0].shape
    offenders = [name for name, img in zip(names, images) if img.shape != shape]
    if offenders:
        raise HeterogeneityError("images disagree on shape", offenders)

    class_names = tuple(sorted(set(entries.values())))
    label_index = {label: i for i, label in enumerate(class_names)}
    return ImageDatabase(
        images=tuple(images),
        labels=tuple(label_index[entries[name]] for name in names),
        class_names=class_names,
    )
