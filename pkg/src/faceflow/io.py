"""File codecs: binary PPM/PGM (plus PNG through Pillow), raw float planes, Middlebury ``.flo``."""

from __future__ import annotations

import io as _io
from pathlib import Path

import numpy as np

from ._atomic import atomic_write_bytes

FLO_MAGIC = 202021.25  # b"PIEH" read as a little-endian float32


class FormatError(ValueError):
    pass


def to_bytes8(image: np.ndarray) -> np.ndarray:
    return np.round(np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0) * 255.0).astype(np.uint8)


def encode_pnm(image: np.ndarray) -> bytes:
    """P6 for ``(H, W, 3)`` input, P5 for ``(H, W)``; values in [0, 1]."""
    pixels = to_bytes8(image)
    if pixels.ndim == 3 and pixels.shape[2] == 3:
        magic = b"P6"
    elif pixels.ndim == 2:
        magic = b"P5"
    else:
        raise FormatError(f"cannot encode array of shape {pixels.shape} as PNM")
    h, w = pixels.shape[:2]
    return magic + b"\n%d %d\n255\n" % (w, h) + pixels.tobytes()


def _pnm_tokens(data: bytes, count: int):
    tokens, pos = [], 0
    while len(tokens) < count:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError("truncated PNM header")
        tokens.append(data[start:pos])
    return tokens, pos + 1  # one whitespace byte ends the header


def decode_pnm(data: bytes) -> np.ndarray:
    (magic, w, h, maxval), offset = _pnm_tokens(data, 4)
    if magic not in (b"P5", b"P6") or int(maxval) != 255:
        raise FormatError(f"unsupported PNM variant {magic!r} maxval {maxval!r}")
    w, h = int(w), int(h)
    channels = 3 if magic == b"P6" else 1
    n = w * h * channels
    body = np.frombuffer(data, dtype=np.uint8, count=n, offset=offset)
    shape = (h, w, 3) if channels == 3 else (h, w)
    return body.reshape(shape).astype(np.float64) / 255.0


def write_image(path, image: np.ndarray) -> Path:
    path = Path(path)
    if path.suffix.lower() == ".png":
        from PIL import Image as PILImage

        buf = _io.BytesIO()
        PILImage.fromarray(to_bytes8(image)).save(buf, format="PNG")
        return atomic_write_bytes(path, buf.getvalue())
    return atomic_write_bytes(path, encode_pnm(image))


def read_image(path) -> np.ndarray:
    path = Path(path)
    if path.suffix.lower() == ".png":
        from PIL import Image as PILImage

        with PILImage.open(path) as img:
            arr = np.asarray(img.convert("RGB" if img.mode not in ("L", "1") else "L"))
        return arr.astype(np.float64) / 255.0
    return decode_pnm(path.read_bytes())


def write_raw(path, plane: np.ndarray) -> Path:
    """Headerless little-endian float64 dump in C order."""
    return atomic_write_bytes(path, np.ascontiguousarray(plane, dtype="<f8").tobytes())


def read_raw(path, shape) -> np.ndarray:
    data = Path(path).read_bytes()
    expected = 8 * int(np.prod(shape))
    if len(data) != expected:
        raise FormatError(f"{path}: expected {expected} bytes for shape {tuple(shape)}, found {len(data)}")
    return np.frombuffer(data, dtype="<f8").astype(np.float64).reshape(shape)


def encode_flo(flow: np.ndarray) -> bytes:
    flow = np.asarray(flow)
    if flow.ndim != 3 or flow.shape[2] < 2:
        raise FormatError(f"flow must be (H, W, >=2), got {flow.shape}")
    h, w = flow.shape[:2]
    header = np.array([FLO_MAGIC], dtype="<f4").tobytes() + np.array([w, h], dtype="<i4").tobytes()
    return header + np.ascontiguousarray(flow[:, :, :2], dtype="<f4").tobytes()


def decode_flo(data: bytes) -> np.ndarray:
    if len(data) < 12:
        raise FormatError("truncated .flo header")
    magic = np.frombuffer(data, dtype="<f4", count=1)[0]
    if magic != np.float32(FLO_MAGIC):
        raise FormatError("bad .flo magic")
    w, h = (int(v) for v in np.frombuffer(data, dtype="<i4", count=2, offset=4))
    if w < 0 or h < 0 or len(data) != 12 + 8 * w * h:
        raise FormatError(f"bad .flo size for {w}x{h}")
    return np.frombuffer(data, dtype="<f4", count=2 * w * h, offset=12).reshape(h, w, 2).astype(np.float32)


def write_flo(path, flow: np.ndarray) -> Path:
    """Write the x/y channels of ``flow`` as a Middlebury ``.flo`` file (float32)."""
    return atomic_write_bytes(path, encode_flo(flow))


def read_flo(path) -> np.ndarray:
    return decode_flo(Path(path).read_bytes())
