"""PGM (P2/P5, 8/16-bit) and 8-bit grayscale PNG codecs.

Decoded probability maps are ``stored / maxval``; decoded masks are
``stored > 0``. Probability maps are written as 16-bit binary PGM unless
asked otherwise.
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

from .grid import BinaryMask, ProbabilityMap

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"
_WHITESPACE = b" \t\r\n\v\f"


class RasterError(ValueError):
    """Malformed or unsupported raster payload."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


def decode_raster(data: bytes, kind: str = "probability"):
    """Decode PGM or PNG bytes into a ``ProbabilityMap`` or ``BinaryMask``."""
    if kind not in ("probability", "mask"):
        raise ValueError(f"unknown raster kind {kind!r}")
    data = bytes(data)
    if data.startswith(PNG_SIGNATURE):
        stored, maxval = _decode_png(data)
    elif data[:2] in (b"P2", b"P5"):
        stored, maxval = _decode_pgm(data)
    else:
        raise RasterError("unrecognised raster signature", 0)
    if kind == "mask":
        return BinaryMask(stored > 0)
    return ProbabilityMap(stored.astype(np.float64) / maxval)


def encode_raster(grid, maxval: int | None = None, fmt: str = "pgm") -> bytes:
    """Encode a mask or probability map.

    Masks are stored as 0/255 (or 0/``maxval``). Probability maps are
    rounded to the nearest level of ``maxval`` (65535 by default, so the
    round-trip error is at most ``1 / (2 * maxval)``).
    """
    if isinstance(grid, BinaryMask):
        is_mask = True
        arr = grid.values
    elif isinstance(grid, ProbabilityMap):
        is_mask = False
        arr = grid.values
    else:
        arr = np.asarray(grid)
        is_mask = arr.dtype == bool
        if not is_mask:
            arr = ProbabilityMap(arr).values
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"cannot encode degenerate raster of shape {arr.shape}")

    if fmt == "png":
        if maxval not in (None, 255):
            raise ValueError("PNG output is 8-bit only")
        maxval = 255
    elif fmt != "pgm":
        raise ValueError(f"unknown raster format {fmt!r}")
    if maxval is None:
        maxval = 255 if is_mask else 65535
    if not 1 <= maxval <= 65535:
        raise ValueError(f"maxval must be in [1, 65535], got {maxval}")

    if is_mask:
        stored = np.where(arr, maxval, 0)
    else:
        stored = np.floor(arr * maxval + 0.5)
    stored = stored.astype(np.uint16 if maxval > 255 else np.uint8)

    if fmt == "png":
        return _encode_png(stored)
    h, w = stored.shape
    header = f"P5\n{w} {h}\n{maxval}\n".encode("ascii")
    return header + stored.astype(">u2" if maxval > 255 else "u1").tobytes()


def read_raster(path, kind: str = "probability"):
    return decode_raster(Path(path).read_bytes(), kind)


def write_raster(path, grid, maxval: int | None = None) -> None:
    fmt = "png" if str(path).lower().endswith(".png") else "pgm"
    Path(path).write_bytes(encode_raster(grid, maxval=maxval, fmt=fmt))


# -- PGM ---------------------------------------------------------------------


def _pgm_tokens(data: bytes, start: int, count: int):
    """Parse ``count`` integer tokens; return ``[(value, offset)...]`` and end offset."""
    pos = start
    tokens = []
    n = len(data)
    while len(tokens) < count:
        while pos < n and (data[pos] in _WHITESPACE or data[pos] == ord("#")):
            if data[pos] == ord("#"):
                while pos < n and data[pos] not in b"\r\n":
                    pos += 1
            else:
                pos += 1
        if pos >= n:
            raise RasterError("truncated PGM header", pos)
        begin = pos
        while pos < n and data[pos] not in _WHITESPACE and data[pos] != ord("#"):
            pos += 1
        tok = data[begin:pos]
        if not tok.isdigit():
            raise RasterError(f"malformed PGM header field {tok[:16]!r}", begin)
        tokens.append((int(tok), begin))
    return tokens, pos


def _decode_pgm(data: bytes):
    magic = data[:2]
    header, pos = _pgm_tokens(data, 2, 3)
    (w, w_at), (h, h_at), (maxval, m_at) = header
    if w < 1 or h < 1:
        raise RasterError(f"degenerate PGM dimensions {w}x{h}", w_at if w < 1 else h_at)
    if not 1 <= maxval <= 65535:
        raise RasterError(f"unsupported PGM maxval {maxval}", m_at)

    if magic == b"P5":
        if pos >= len(data) or data[pos] not in _WHITESPACE:
            raise RasterError("missing separator after PGM maxval", pos)
        pos += 1
        depth = 2 if maxval > 255 else 1
        need = w * h * depth
        if len(data) - pos < need:
            raise RasterError(
                f"truncated PGM payload: need {need} bytes, have {len(data) - pos}",
                len(data),
            )
        dtype = ">u2" if depth == 2 else "u1"
        stored = np.frombuffer(data, dtype=dtype, count=w * h, offset=pos)
        stored = stored.astype(np.int64).reshape(h, w)
        if stored.max() > maxval:
            bad = int(np.argmax(stored.ravel() > maxval))
            raise RasterError("PGM sample exceeds maxval", pos + bad * depth)
        return stored, maxval

    try:
        samples, _ = _pgm_tokens(data, pos, w * h)
    except RasterError as exc:
        raise RasterError("truncated or malformed P2 payload", exc.offset) from None
    values = np.array([v for v, _ in samples], dtype=np.int64)
    over = np.nonzero(values > maxval)[0]
    if over.size:
        raise RasterError("PGM sample exceeds maxval", samples[over[0]][1])
    return values.reshape(h, w), maxval


# -- PNG ---------------------------------------------------------------------


def _paeth(a: int, b: int, c: int) -> int:
    p = a + b - c
    pa, pb, pc = abs(p - a), abs(p - b), abs(p - c)
    if pa <= pb and pa <= pc:
        return a
    return b if pb <= pc else c


def _decode_png(data: bytes):
    pos = len(PNG_SIGNATURE)
    ihdr = None
    idat = []
    while True:
        if pos + 8 > len(data):
            raise RasterError("truncated PNG chunk header", pos)
        length, ctype = struct.unpack(">I4s", data[pos:pos + 8])
        body_at = pos + 8
        if body_at + length + 4 > len(data):
            raise RasterError(f"truncated PNG chunk {ctype!r}", pos)
        body = data[body_at:body_at + length]
        (crc,) = struct.unpack(">I", data[body_at + length:body_at + length + 4])
        if zlib.crc32(ctype + body) & 0xFFFFFFFF != crc:
            raise RasterError(f"bad CRC in PNG chunk {ctype!r}", body_at + length)
        if ctype == b"IHDR":
            if length != 13:
                raise RasterError("malformed IHDR", body_at)
            ihdr = struct.unpack(">IIBBBBB", body)
            w, h, depth, color, _comp, _filt, interlace = ihdr
            if depth != 8 or color != 0:
                raise RasterError(
                    f"unsupported PNG format (bit depth {depth}, colour type {color}); "
                    "only 8-bit grayscale is accepted",
                    body_at + 8,
                )
            if interlace != 0:
                raise RasterError("interlaced PNG is not supported", body_at + 12)
            if w < 1 or h < 1:
                raise RasterError(f"degenerate PNG dimensions {w}x{h}", body_at)
        elif ctype == b"IDAT":
            if ihdr is None:
                raise RasterError("IDAT before IHDR", pos)
            idat.append(body)
        elif ctype == b"IEND":
            break
        pos = body_at + length + 4

    if ihdr is None or not idat:
        raise RasterError("PNG has no image data", pos)
    w, h = ihdr[0], ihdr[1]
    try:
        raw = zlib.decompress(b"".join(idat))
    except zlib.error:
        raise RasterError("corrupt PNG zlib stream", pos) from None
    stride = w + 1
    if len(raw) < stride * h:
        raise RasterError("truncated PNG pixel stream", pos)

    out = np.zeros((h, w), dtype=np.int64)
    prev = np.zeros(w, dtype=np.int64)
    for row in range(h):
        ftype = raw[row * stride]
        line = np.frombuffer(raw, dtype=np.uint8, count=w, offset=row * stride + 1).astype(np.int64)
        if ftype == 0:
            cur = line
        elif ftype == 1:
            cur = line.copy()
            for i in range(1, w):
                cur[i] = (cur[i] + cur[i - 1]) & 0xFF
        elif ftype == 2:
            cur = (line + prev) & 0xFF
        elif ftype == 3:
            cur = line.copy()
            for i in range(w):
                left = cur[i - 1] if i else 0
                cur[i] = (cur[i] + ((left + prev[i]) >> 1)) & 0xFF
        elif ftype == 4:
            cur = line.copy()
            for i in range(w):
                left = cur[i - 1] if i else 0
                upleft = prev[i - 1] if i else 0
                cur[i] = (cur[i] + _paeth(int(left), int(prev[i]), int(upleft))) & 0xFF
        else:
            raise RasterError(f"unknown PNG filter type {ftype} on row {row}", pos)
        out[row] = cur
        prev = cur
    return out, 255


def _chunk(ctype: bytes, body: bytes) -> bytes:
    return (
        struct.pack(">I", len(body))
        + ctype
        + body
        + struct.pack(">I", zlib.crc32(ctype + body) & 0xFFFFFFFF)
    )


def _encode_png(stored: np.ndarray) -> bytes:
    h, w = stored.shape
    rows = np.zeros((h, w + 1), dtype=np.uint8)
    rows[:, 1:] = stored
    ihdr = struct.pack(">IIBBBBB", w, h, 8, 0, 0, 0, 0)
    return (
        PNG_SIGNATURE
        + _chunk(b"IHDR", ihdr)
        + _chunk(b"IDAT", zlib.compress(rows.tobytes(), 9))
        + _chunk(b"IEND", b"")
    )
