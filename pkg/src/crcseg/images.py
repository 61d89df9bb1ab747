"""Minimal PNG and PPM codecs for heatmap output and overlay input.

The writer emits 8-bit truecolor PNG with the deflate payload stored in
uncompressed blocks. Stored blocks make the byte stream a pure function
of the pixels, independent of any zlib implementation, which is what
keeps golden-file tests meaningful across platforms; the files are
still perfectly standard PNG. PPM (binary P6, maxval 255) is offered as
a fallback for environments without PNG tooling.

The reader accepts the matching subset plus common photo variants:
non-interlaced 8-bit grayscale, RGB, and RGBA (alpha dropped), with all
five scanline filters.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

from .errors import ImageFormatError

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"

_STORED_BLOCK = 65535


def _chunk(tag: bytes, payload: bytes) -> bytes:
    crc = zlib.crc32(tag + payload) & 0xFFFFFFFF
    return struct.pack(">I", len(payload)) + tag + payload + struct.pack(">I", crc)


def _zlib_stored(data: bytes) -> bytes:
    """A zlib stream holding ``data`` in stored (uncompressed) blocks."""
    parts = [b"\x78\x01"]
    offset = 0
    while True:
        block = data[offset : offset + _STORED_BLOCK]
        offset += _STORED_BLOCK
        final = offset >= len(data)
        parts.append(struct.pack("<BHH", 1 if final else 0, len(block), len(block) ^ 0xFFFF))
        parts.append(block)
        if final:
            break
    parts.append(struct.pack(">I", zlib.adler32(data) & 0xFFFFFFFF))
    return b"".join(parts)


def _check_rgb(image) -> np.ndarray:
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError(f"expected an (H, W, 3) image, got shape {image.shape}")
    if image.dtype != np.uint8:
        raise ValueError(f"expected uint8 pixels, got {image.dtype}")
    if image.shape[0] < 1 or image.shape[1] < 1:
        raise ValueError("image must have at least one pixel")
    return image


def png_bytes(image) -> bytes:
    """Encode an (H, W, 3) uint8 array as a PNG byte string."""
    image = _check_rgb(image)
    height, width = image.shape[:2]
    header = struct.pack(">IIBBBBB", width, height, 8, 2, 0, 0, 0)
    raw = b"".join(b"\x00" + image[row].tobytes() for row in range(height))
    return (
        PNG_SIGNATURE
        + _chunk(b"IHDR", header)
        + _chunk(b"IDAT", _zlib_stored(raw))
        + _chunk(b"IEND", b"")
    )


def ppm_bytes(image) -> bytes:
    """Encode an (H, W, 3) uint8 array as binary PPM (P6, maxval 255)."""
    image = _check_rgb(image)
    height, width = image.shape[:2]
    return f"P6\n{width} {height}\n255\n".encode("ascii") + image.tobytes()


def write_image(path, image) -> None:
    """Write PNG or PPM depending on the file extension."""
    text = str(path)
    if text.lower().endswith(".ppm"):
        data = ppm_bytes(image)
    elif text.lower().endswith(".png"):
        data = png_bytes(image)
    else:
        raise ValueError(f"unsupported image extension for {text!r} (use .png or .ppm)")
    with open(path, "wb") as handle:
        handle.write(data)


def _paeth(a: int, b: int, c: int) -> int:
    p = a + b - c
    pa, pb, pc = abs(p - a), abs(p - b), abs(p - c)
    if pa <= pb and pa <= pc:
        return a
    if pb <= pc:
        return b
    return c


def _unfilter(data: bytes, height: int, width: int, channels: int) -> np.ndarray:
    stride = width * channels
    expected = height * (stride + 1)
    if len(data) != expected:
        raise ImageFormatError(
            f"decompressed scanline data is {len(data)} bytes, expected {expected}"
        )
    out = np.empty((height, stride), dtype=np.uint8)
    prev = np.zeros(stride, dtype=np.int64)
    pos = 0
    for rownum in range(height):
        ftype = data[pos]
        row = np.frombuffer(data, dtype=np.uint8, count=stride, offset=pos + 1).astype(np.int64)
        pos += stride + 1
        if ftype == 0:
            pass
        elif ftype == 1:
            # additions mod 256 telescope, so a masked cumsum recovers the row
            for c in range(channels):
                row[c::channels] = np.cumsum(row[c::channels]) & 0xFF
        elif ftype == 2:
            row = (row + prev) & 0xFF
        elif ftype == 3:
            for x in range(stride):
                left = row[x - channels] if x >= channels else 0
                row[x] = (row[x] + (left + prev[x]) // 2) & 0xFF
        elif ftype == 4:
            for x in range(stride):
                left = int(row[x - channels]) if x >= channels else 0
                upleft = int(prev[x - channels]) if x >= channels else 0
                row[x] = (row[x] + _paeth(left, int(prev[x]), upleft)) & 0xFF
        else:
            raise ImageFormatError(f"unknown PNG filter type {ftype}")
        out[rownum] = row.astype(np.uint8)
        prev = row
    return out.reshape(height, width, channels)


def _read_png(data: bytes) -> np.ndarray:
    if not data.startswith(PNG_SIGNATURE):
        raise ImageFormatError("not a PNG file")
    pos = len(PNG_SIGNATURE)
    header = None
    idat = []
    while pos < len(data):
        if pos + 8 > len(data):
            raise ImageFormatError("truncated PNG chunk header")
        (length,) = struct.unpack(">I", data[pos : pos + 4])
        tag = data[pos + 4 : pos + 8]
        body = data[pos + 8 : pos + 8 + length]
        if len(body) != length:
            raise ImageFormatError("truncated PNG chunk body")
        pos += 12 + length
        if tag == b"IHDR":
            header = body
        elif tag == b"IDAT":
            idat.append(body)
        elif tag == b"IEND":
            break
    if header is None or len(header) != 13:
        raise ImageFormatError("missing or malformed IHDR")
    width, height, depth, color, compression, filt, interlace = struct.unpack(
        ">IIBBBBB", header
    )
    if depth != 8:
        raise ImageFormatError(f"only 8-bit PNG is supported, got depth {depth}")
    if color not in (0, 2, 6):
        raise ImageFormatError(f"unsupported PNG color type {color}")
    if compression != 0 or filt != 0:
        raise ImageFormatError("nonstandard PNG compression or filter method")
    if interlace != 0:
        raise ImageFormatError("interlaced PNG is not supported")
    if width < 1 or height < 1:
        raise ImageFormatError("PNG with empty dimensions")
    if not idat:
        raise ImageFormatError("PNG has no IDAT data")
    try:
        raw = zlib.decompress(b"".join(idat))
    except zlib.error as exc:
        raise ImageFormatError(f"corrupt PNG pixel data: {exc}") from None
    channels = {0: 1, 2: 3, 6: 4}[color]
    pixels = _unfilter(raw, height, width, channels)
    if channels == 1:
        return np.repeat(pixels, 3, axis=2)
    if channels == 4:
        return np.ascontiguousarray(pixels[:, :, :3])
    return pixels


def _read_ppm(data: bytes) -> np.ndarray:
    # token scanner honoring netpbm whitespace and '#' comments
    pos = 2

    def token() -> bytes:
        nonlocal pos
        while pos < len(data):
            ch = data[pos : pos + 1]
            if ch == b"#":
                while pos < len(data) and data[pos : pos + 1] != b"\n":
                    pos += 1
            elif ch.isspace():
                pos += 1
            else:
                break
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ImageFormatError("truncated PPM header")
        return data[start:pos]

    try:
        width = int(token())
        height = int(token())
        maxval = int(token())
    except ValueError:
        raise ImageFormatError("malformed PPM header") from None
    if maxval != 255:
        raise ImageFormatError(f"only maxval 255 PPM is supported, got {maxval}")
    if width < 1 or height < 1:
        raise ImageFormatError("PPM with empty dimensions")
    pos += 1  # single whitespace byte after maxval
    body = data[pos : pos + width * height * 3]
    if len(body) != width * height * 3:
        raise ImageFormatError("truncated PPM pixel data")
    return np.frombuffer(body, dtype=np.uint8).reshape(height, width, 3).copy()


def read_image(path) -> np.ndarray:
    """Read a PNG or PPM file into an (H, W, 3) uint8 array."""
    with open(path, "rb") as handle:
        data = handle.read()
    if data.startswith(PNG_SIGNATURE):
        return _read_png(data)
    if data.startswith(b"P6"):
        return _read_ppm(data)
    raise ImageFormatError(f"{path}: neither PNG nor binary PPM")
