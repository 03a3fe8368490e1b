"""Core raster containers and bit-exact file I/O.

All pixel data lives in row-major 2-D numpy arrays with the origin at the
top-left corner and y increasing downward (PNG scanline order). Scalar
samples are stored as float32 regardless of the on-disk dtype so that
morphological arithmetic (e.g. ``f - h``) may go negative without clamping.
Integer samples load without rescaling: pixel value ``n`` becomes ``n.0``.

Two on-disk formats are supported:

* 8- or 16-bit single-channel grayscale PNG (sample-exact round trip), and
* the RAS container: little-endian magic ``CSR1``, u32 width, u32 height,
  u32 dtype (0=u8, 1=u16, 2=u32, 3=f32), then width*height samples
  row-major with no padding or checksum (bit-exact round trip).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Union

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import (
    CorruptFileError,
    DimensionMismatchError,
    DimensionOverflowError,
    EmptyStackError,
    LabelOverflowError,
    SampleRangeError,
    UnsupportedFormatError,
)

RAS_MAGIC = b"CSR1"
_RAS_DTYPES = {0: np.dtype("<u1"), 1: np.dtype("<u2"), 2: np.dtype("<u4"), 3: np.dtype("<f4")}
_RAS_CODES = {np.dtype("uint8"): 0, np.dtype("uint16"): 1, np.dtype("uint32"): 2, np.dtype("float32"): 3}

# Refuse headers whose pixel count cannot be indexed with a signed 32-bit int.
MAX_PIXELS = 2**31 - 1

PathLike = Union[str, Path]


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Raster:
    """2-D single-channel image of finite float32 samples."""

    samples: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.samples)
        if arr.ndim != 2:
            raise DimensionMismatchError(f"raster must be 2-D, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DimensionMismatchError("raster dimensions must be at least 1x1")
        arr = np.ascontiguousarray(arr, dtype=np.float32)
        if not np.all(np.isfinite(arr)):
            raise SampleRangeError("raster samples must be finite (no NaN/inf)")
        object.__setattr__(self, "samples", _freeze(arr))

    @property
    def width(self) -> int:
        return self.samples.shape[1]

    @property
    def height(self) -> int:
        return self.samples.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.samples.shape


@dataclass(frozen=True)
class LabelMap:
    """2-D image of non-negative instance ids; 0 is background."""

    labels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.labels)
        if arr.ndim != 2:
            raise DimensionMismatchError(f"label map must be 2-D, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DimensionMismatchError("label map dimensions must be at least 1x1")
        if not np.issubdtype(arr.dtype, np.integer):
            raise SampleRangeError("labels must be integers")
        if arr.size and arr.min() < 0:
            raise SampleRangeError("labels must be non-negative")
        if arr.size and arr.max() > np.iinfo(np.int32).max:
            raise LabelOverflowError("labels above 2**31-1 are not supported")
        arr = np.ascontiguousarray(arr, dtype=np.int32)
        object.__setattr__(self, "labels", _freeze(arr))

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.labels.shape

    def distinct_labels(self) -> np.ndarray:
        """Sorted array of the positive labels actually used."""
        u = np.unique(self.labels)
        return u[u > 0]


@dataclass(frozen=True)
class BinaryMask:
    """2-D boolean image (semantic foreground)."""

    bits: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.bits)
        if arr.ndim != 2:
            raise DimensionMismatchError(f"mask must be 2-D, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DimensionMismatchError("mask dimensions must be at least 1x1")
        arr = np.ascontiguousarray(arr != 0)
        object.__setattr__(self, "bits", _freeze(arr))

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.bits.shape


@dataclass(frozen=True)
class ZStack:
    """Ordered list of equally sized focal planes."""

    planes: tuple[Raster, ...]

    def __post_init__(self):
        planes = tuple(self.planes)
        if not planes:
            raise EmptyStackError("z-stack needs at least one plane")
        shape = planes[0].shape
        for p in planes[1:]:
            if p.shape != shape:
                raise DimensionMismatchError(
                    f"all planes must share dimensions, got {p.shape} vs {shape}"
                )
        object.__setattr__(self, "planes", planes)


def check_same_shape(*images) -> None:
    shapes = {im.shape for im in images}
    if len(shapes) > 1:
        raise DimensionMismatchError(f"dimension mismatch: {sorted(shapes)}")


def max_project(stack: ZStack) -> Raster:
    """Pixelwise maximum over all planes of a z-stack."""
    out = stack.planes[0].samples
    for p in stack.planes[1:]:
        out = np.maximum(out, p.samples)
    return Raster(out)


# ---------------------------------------------------------------------------
# RAS container


def _write_ras(path: PathLike, arr: np.ndarray) -> None:
    code = _RAS_CODES[arr.dtype]
    header = RAS_MAGIC + struct.pack("<III", arr.shape[1], arr.shape[0], code)
    payload = np.ascontiguousarray(arr, dtype=arr.dtype.newbyteorder("<")).tobytes()
    Path(path).write_bytes(header + payload)


def _read_ras(path: PathLike) -> np.ndarray:
    data = Path(path).read_bytes()
    if data[:4] != RAS_MAGIC:
        raise UnsupportedFormatError(f"{path}: bad magic {data[:4]!r}")
    if len(data) < 16:
        raise CorruptFileError(f"{path}: truncated RAS header")
    width, height, code = struct.unpack_from("<III", data, 4)
    if code not in _RAS_DTYPES:
        raise CorruptFileError(f"{path}: unknown RAS dtype code {code}")
    if width < 1 or height < 1:
        raise CorruptFileError(f"{path}: zero-sized RAS image")
    if width * height > MAX_PIXELS:
        raise DimensionOverflowError(f"{path}: {width}x{height} exceeds addressable size")
    dtype = _RAS_DTYPES[code]
    expected = 16 + width * height * dtype.itemsize
    if len(data) != expected:
        raise CorruptFileError(f"{path}: expected {expected} bytes, found {len(data)}")
    arr = np.frombuffer(data, dtype=dtype, count=width * height, offset=16)
    return arr.reshape(height, width)


# ---------------------------------------------------------------------------
# PNG (via Pillow; 8/16-bit single-channel grayscale only)

_GRAY_MODES = ("L", "I;16", "I")


def _read_png(path: PathLike) -> np.ndarray:
    try:
        with Image.open(path) as img:
            if img.format != "PNG":
                raise UnsupportedFormatError(f"{path}: not a PNG or RAS file")
            if img.mode not in _GRAY_MODES:
                raise UnsupportedFormatError(
                    f"{path}: only 8/16-bit grayscale PNG supported, got mode {img.mode}"
                )
            if img.width * img.height > MAX_PIXELS:
                raise DimensionOverflowError(
                    f"{path}: {img.width}x{img.height} exceeds addressable size"
                )
            try:
                return np.asarray(img)
            except OSError as exc:
                raise CorruptFileError(f"{path}: {exc}") from exc
    except UnidentifiedImageError as exc:
        raise UnsupportedFormatError(f"{path}: {exc}") from exc
    except (SyntaxError, ValueError) as exc:  # PIL raises these on mangled payloads
        raise CorruptFileError(f"{path}: {exc}") from exc


def _write_png16(path: PathLike, arr: np.ndarray) -> None:
    Image.fromarray(np.ascontiguousarray(arr, dtype=np.uint16)).save(path, format="PNG")


def _sniff(path: PathLike) -> str:
    with open(path, "rb") as fh:
        magic = fh.read(8)
    if magic[:4] == RAS_MAGIC:
        return "ras"
    if magic == b"\x89PNG\r\n\x1a\n":
        return "png16"
    raise UnsupportedFormatError(f"{path}: bad magic {magic[:4]!r}")


def _resolve_format(path: PathLike, format: str) -> str:
    if format == "auto":
        return _sniff(path)
    if format not in ("png16", "ras"):
        raise ValueError(f"unknown format {format!r}")
    return format


# ---------------------------------------------------------------------------
# Public load/save


def load_raster(path: PathLike, format: str = "auto") -> Raster:
    """Load a raster from PNG or RAS without rescaling sample values."""
    fmt = _resolve_format(path, format)
    arr = _read_ras(path) if fmt == "ras" else _read_png(path)
    if arr.dtype.kind == "f" and not np.all(np.isfinite(arr)):
        raise CorruptFileError(f"{path}: non-finite samples in payload")
    return Raster(arr)


def save_raster(r: Raster, path: PathLike, format: str = "ras") -> None:
    """Write a raster; RAS is bit-exact, png16 requires integer samples in [0, 65535]."""
    if format == "ras":
        _write_ras(path, r.samples)
    elif format == "png16":
        s = r.samples
        if np.any(s != np.floor(s)) or s.min() < 0 or s.max() > 65535:
            raise SampleRangeError("png16 requires integer samples in [0, 65535]")
        _write_png16(path, s.astype(np.uint16))
    else:
        raise ValueError(f"unknown format {format!r}")


def load_labels(path: PathLike, format: str = "auto") -> LabelMap:
    """Load a label map; PNG pixel value or RAS integer sample is the label id."""
    fmt = _resolve_format(path, format)
    if fmt == "ras":
        arr = _read_ras(path)
        if arr.dtype.kind != "u":
            raise UnsupportedFormatError(f"{path}: label RAS must have integer dtype")
    else:
        arr = _read_png(path)
    return LabelMap(arr)


def save_labels(l: LabelMap, path: PathLike, format: str = "png16") -> None:
    """Write a label map as 16-bit PNG or RAS (u16 when labels fit, else u32)."""
    arr = l.labels
    maxlabel = int(arr.max()) if arr.size else 0
    if format == "png16":
        if maxlabel > 65535:
            raise LabelOverflowError(f"label {maxlabel} does not fit in 16-bit PNG")
        _write_png16(path, arr.astype(np.uint16))
    elif format == "ras":
        dtype = np.uint16 if maxlabel <= 65535 else np.uint32
        _write_ras(path, arr.astype(dtype))
    else:
        raise ValueError(f"unknown format {format!r}")


def load_stack(paths: Iterable[PathLike], format: str = "auto") -> ZStack:
    return ZStack(tuple(load_raster(p, format) for p in paths))
