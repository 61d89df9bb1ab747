"""Strict reader and writer for the NPY v1.0 container subset.

Scores travel as little-endian float32 (K, H, W) arrays, masks as
unsigned 1- or 2-byte (H, W) label grids, multi-masks as uint8
(K, H, W) bit tensors; everything is C-ordered. Nothing else is
accepted: version 2.0/3.0 headers, fortran order, other dtypes, and
size mismatches all raise a typed error. Parsing is total, so a
malformed or truncated file can never escalate past
``NpyFormatError``. Files written here are bit-reproducible and load
fine with ``numpy.load``. The byte-level layout is documented in
docs/FORMATS.md.
"""

from __future__ import annotations

import ast
import io
import struct

import numpy as np

from .errors import (
    BadMagic,
    DataSizeError,
    FortranOrderUnsupported,
    HeaderParseError,
    InvalidMultiMask,
    ShapeRankError,
    UnsupportedDescriptor,
    UnsupportedVersion,
)
from .types import Dims, GroundTruthMask, MultiMask, ScoreTensor

MAGIC = b"\x93NUMPY"

_SCORE_DESCRS = {"<f4": np.dtype("<f4")}
_MASK_DESCRS = {
    "|u1": np.dtype("u1"),
    "<u1": np.dtype("u1"),
    "<u2": np.dtype("<u2"),
}
_MULTIMASK_DESCRS = {"|u1": np.dtype("u1"), "<u1": np.dtype("u1")}


def _open(source):
    if hasattr(source, "read"):
        return source, False
    return open(source, "rb"), True


def _parse_header(handle) -> tuple[str, bool, tuple[int, ...]]:
    magic = handle.read(len(MAGIC))
    if magic != MAGIC:
        raise BadMagic(f"bad magic bytes {magic!r}")
    version = handle.read(2)
    if len(version) != 2:
        raise UnsupportedVersion("file ends inside the version field")
    if version != b"\x01\x00":
        raise UnsupportedVersion(
            f"only NPY version 1.0 is supported, got {version[0]}.{version[1]}"
        )
    raw_len = handle.read(2)
    if len(raw_len) != 2:
        raise HeaderParseError("file ends inside the header length field")
    (header_len,) = struct.unpack("<H", raw_len)
    header = handle.read(header_len)
    if len(header) != header_len:
        raise HeaderParseError("file ends inside the header")
    try:
        text = header.decode("ascii")
    except UnicodeDecodeError:
        raise HeaderParseError("header is not ASCII") from None
    try:
        meta = ast.literal_eval(text)
    except (ValueError, TypeError, SyntaxError, MemoryError, RecursionError):
        raise HeaderParseError("header is not a Python dict literal") from None
    if not isinstance(meta, dict) or set(meta) != {"descr", "fortran_order", "shape"}:
        raise HeaderParseError("header must hold exactly descr, fortran_order, shape")
    descr = meta["descr"]
    if not isinstance(descr, str):
        raise UnsupportedDescriptor(f"descr must be a string, got {descr!r}")
    order = meta["fortran_order"]
    if not isinstance(order, bool):
        raise HeaderParseError(f"fortran_order must be a bool, got {order!r}")
    if order:
        raise FortranOrderUnsupported("fortran-ordered arrays are not supported")
    shape = meta["shape"]
    if not isinstance(shape, tuple) or not all(
        isinstance(dim, int) and not isinstance(dim, bool) for dim in shape
    ):
        raise HeaderParseError(f"shape must be a tuple of ints, got {shape!r}")
    return descr, order, shape


def _read_array(source, descrs, rank: int) -> np.ndarray:
    handle, owned = _open(source)
    try:
        descr, _, shape = _parse_header(handle)
        if descr not in descrs:
            raise UnsupportedDescriptor(
                f"descriptor {descr!r} not accepted here (expected one of {sorted(descrs)})"
            )
        if len(shape) != rank:
            raise ShapeRankError(f"expected a rank-{rank} array, got shape {shape}")
        if any(dim <= 0 for dim in shape):
            raise ShapeRankError(f"dimensions must be positive, got shape {shape}")
        dtype = descrs[descr]
        count = 1
        for dim in shape:
            count *= dim
        expected = count * dtype.itemsize
        payload = handle.read(expected)
        if len(payload) != expected:
            raise DataSizeError(
                f"payload holds {len(payload)} bytes, header promises {expected}"
            )
        if handle.read(1):
            raise DataSizeError("trailing bytes after the array payload")
        return np.frombuffer(payload, dtype=dtype).reshape(shape).copy()
    finally:
        if owned:
            handle.close()


def _header_bytes(descr: str, shape: tuple[int, ...]) -> bytes:
    shape_text = "(" + ", ".join(str(d) for d in shape) + ("," if len(shape) == 1 else "") + ")"
    body = f"{{'descr': '{descr}', 'fortran_order': False, 'shape': {shape_text}, }}"
    # pad so that the whole preamble is a multiple of 64 bytes, per the format
    unpadded = len(MAGIC) + 2 + 2 + len(body) + 1
    pad = (64 - unpadded % 64) % 64
    header = body + " " * pad + "\n"
    return MAGIC + b"\x01\x00" + struct.pack("<H", len(header)) + header.encode("ascii")


def _write_array(path, array: np.ndarray, descr: str) -> None:
    array = np.ascontiguousarray(array)
    with open(path, "wb") as handle:
        handle.write(_header_bytes(descr, array.shape))
        handle.write(array.tobytes(order="C"))


def read_scores(source, validate: bool = True) -> ScoreTensor:
    """Read a (K, H, W) float32 score tensor from a path or binary stream."""
    values = _read_array(source, _SCORE_DESCRS, rank=3)
    if values.shape[0] < 2:
        raise ShapeRankError(f"score tensors need k >= 2 classes, got shape {values.shape}")
    return ScoreTensor(Dims(*values.shape), values, validate)


def write_scores(path, scores: ScoreTensor) -> None:
    _write_array(path, scores.values, "<f4")


def read_mask(source, k: int) -> GroundTruthMask:
    """Read an (H, W) label grid; ``k`` is the class count of the paired scores."""
    labels = _read_array(source, _MASK_DESCRS, rank=2)
    return GroundTruthMask(Dims(k, *labels.shape), labels)


def write_mask(path, mask: GroundTruthMask) -> None:
    descr = "|u1" if mask.labels.dtype == np.uint8 else "<u2"
    _write_array(path, mask.labels, descr)


def read_multimask(source) -> MultiMask:
    """Read a (K, H, W) uint8 multi-labeled mask of 0/1 entries."""
    bits = _read_array(source, _MULTIMASK_DESCRS, rank=3)
    if bits.shape[0] < 2:
        raise ShapeRankError(f"multi-masks need k >= 2 classes, got shape {bits.shape}")
    if bits.max(initial=0) > 1:
        raise InvalidMultiMask("multi-mask entries must be 0 or 1")
    return MultiMask(Dims(*bits.shape), bits)


def write_multimask(path, mask: MultiMask) -> None:
    _write_array(path, mask.bits, "|u1")


def scores_bytes(scores: ScoreTensor) -> bytes:
    """The exact bytes ``write_scores`` would produce."""
    return _header_bytes("<f4", scores.values.shape) + scores.values.tobytes(order="C")


def parse_scores_bytes(data: bytes, validate: bool = True) -> ScoreTensor:
    return read_scores(io.BytesIO(data), validate=validate)
