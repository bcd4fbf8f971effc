"""Image container, PNG/PNM file I/O, and the transform primitives
(8x8 block DCT, single-level Haar DWT, small-matrix SVD) that the
watermarking schemes and denoisers are built on.

Pixel domain is float in [0, 1]. Intermediate computation may leave that
range; clamping happens at declared boundaries (file I/O, attack outputs).
All transforms are orthonormal so energy is preserved exactly.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
from PIL import Image as _PILImage
from scipy.fft import dctn, idctn

# BT.601 luma weights; they sum to 1, so adding a scalar delta to every
# channel shifts luma by exactly that delta and leaves chroma untouched.
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


class ImageFormatError(ValueError):
    """Unsupported, truncated, or malformed image file."""


class GeometryError(ValueError):
    """Image geometry incompatible with the requested operation."""


@dataclass(frozen=True)
class Image:
    """Float-intensity raster, shape (height, width, channels), channels 1 or 3.

    The pixel buffer is marked read-only; operations return new images.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3 or arr.shape[2] not in (1, 3):
            raise GeometryError(f"expected (h, w, 1|3) data, got shape {arr.shape}")
        if arr.shape[0] == 0 or arr.shape[1] == 0:
            raise GeometryError("zero-dimension image")
        if not np.all(np.isfinite(arr)):
            raise ValueError("image data contains NaN/Inf")
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    def gray(self) -> np.ndarray:
        """Luma plane as a 2-D array (the single channel for grayscale)."""
        if self.channels == 1:
            return self.data[:, :, 0]
        return self.data @ LUMA_WEIGHTS

    def with_gray(self, new_gray: np.ndarray) -> "Image":
        """Replace luma, leaving chroma untouched (delta added to every channel)."""
        delta = np.asarray(new_gray, dtype=np.float64) - self.gray()
        return Image(self.data + delta[:, :, None])

    def clamped(self) -> "Image":
        return Image(np.clip(self.data, 0.0, 1.0))


def quantize_u8(values: np.ndarray) -> np.ndarray:
    """round(clamp(v, 0, 1) * 255), round-half-up."""
    v = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    return np.floor(v * 255.0 + 0.5).astype(np.uint8)


# ---------------------------------------------------------------------------
# File I/O: 8-bit PNG (no interlace) and binary PGM (P5) / PPM (P6)


def load_image(path) -> Image:
    """Load an 8-bit PNG, PGM, or PPM file; values are raw/255."""
    path = str(path)
    with open(path, "rb") as fh:
        head = fh.read(2)
        fh.seek(0)
        raw = fh.read()
    if head in (b"P5", b"P6"):
        arr = _decode_pnm(raw)
    elif raw[:8] == b"\x89PNG\r\n\x1a\n":
        arr = _decode_png(raw)
    else:
        raise ImageFormatError(f"unsupported image format: {path}")
    return Image(arr.astype(np.float64) / 255.0)


def save_image(img: Image, path) -> None:
    """Write quantized 8-bit pixels; identical input yields identical bytes."""
    path = str(path)
    data = quantize_u8(img.data)
    if path.lower().endswith((".pgm", ".ppm", ".pnm")):
        payload = _encode_pnm(data)
    elif path.lower().endswith(".png"):
        payload = _encode_png(data)
    else:
        raise ImageFormatError(f"unsupported output format: {path}")
    with open(path, "wb") as fh:
        fh.write(payload)


def _decode_pnm(raw: bytes) -> np.ndarray:
    tokens = []
    pos = 0
    while len(tokens) < 4:
        if pos >= len(raw):
            raise ImageFormatError("truncated PNM header")
        ch = raw[pos : pos + 1]
        if ch == b"#":
            pos = raw.find(b"\n", pos)
            if pos < 0:
                raise ImageFormatError("truncated PNM header")
            continue
        if ch.isspace():
            pos += 1
            continue
        end = pos
        while end < len(raw) and not raw[end : end + 1].isspace():
            end += 1
        tokens.append(raw[pos:end])
        pos = end
    magic, w, h, maxval = tokens[0], int(tokens[1]), int(tokens[2]), int(tokens[3])
    if magic not in (b"P5", b"P6"):
        raise ImageFormatError("not a binary PGM/PPM")
    if maxval != 255:
        raise ImageFormatError("only 8-bit PNM supported")
    if w <= 0 or h <= 0:
        raise GeometryError("zero-dimension image")
    channels = 1 if magic == b"P5" else 3
    pos += 1  # single whitespace after maxval
    need = w * h * channels
    body = raw[pos : pos + need]
    if len(body) != need:
        raise ImageFormatError("truncated PNM pixel data")
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w, channels)


def _encode_pnm(data: np.ndarray) -> bytes:
    h, w, c = data.shape
    magic = b"P5" if c == 1 else b"P6"
    return magic + f"\n{w} {h}\n255\n".encode("ascii") + data.tobytes()


def _decode_png(raw: bytes) -> np.ndarray:
    try:
        with _PILImage.open(io.BytesIO(raw)) as im:
            if im.mode not in ("L", "RGB"):
                raise ImageFormatError(f"unsupported PNG mode {im.mode!r} (need 8-bit L or RGB)")
            if im.info.get("interlace"):
                raise ImageFormatError("interlaced PNG not supported")
            arr = np.asarray(im, dtype=np.uint8)
    except ImageFormatError:
        raise
    except Exception as exc:
        raise ImageFormatError(f"bad PNG: {exc}") from exc
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return arr


def _encode_png(data: np.ndarray) -> bytes:
    h, w, c = data.shape
    mode = "L" if c == 1 else "RGB"
    im = _PILImage.fromarray(data[:, :, 0] if c == 1 else data, mode=mode)
    buf = io.BytesIO()
    im.save(buf, format="PNG")
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Padding policy: transforms need dimensions divisible by the block/step
# size; by default inputs are symmetric-padded and results cropped back.
# Strict mode raises instead.


def pad_to_multiple(plane: np.ndarray, multiple: int, strict: bool = False) -> tuple[np.ndarray, tuple[int, int]]:
    h, w = plane.shape
    ph = (-h) % multiple
    pw = (-w) % multiple
    if (ph or pw) and strict:
        raise GeometryError(f"dimensions {h}x{w} not a multiple of {multiple} (strict mode)")
    if ph or pw:
        plane = np.pad(plane, ((0, ph), (0, pw)), mode="symmetric")
    return plane, (h, w)


@dataclass
class Transform2D:
    """Coefficients of a 2-D transform plus the geometry needed to invert it.

    kind is "DCT8" (coeffs is the blockwise coefficient plane) or
    "HaarDWT1" (subbands holds LL/LH/HL/HH at half dimensions).
    """

    kind: str
    coeffs: np.ndarray | None = None
    subbands: dict = field(default_factory=dict)
    orig_shape: tuple[int, int] | None = None


def _to_plane(img) -> np.ndarray:
    if isinstance(img, Image):
        if img.channels != 1:
            raise GeometryError("transform expects a single channel; extract luma first")
        return img.data[:, :, 0]
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2:
        raise GeometryError("transform expects a 2-D plane")
    return arr


def blockify(plane: np.ndarray, size: int = 8) -> np.ndarray:
    """(h, w) -> (n_blocks, size, size), row-major block order."""
    h, w = plane.shape
    return (
        plane.reshape(h // size, size, w // size, size)
        .transpose(0, 2, 1, 3)
        .reshape(-1, size, size)
    )


def unblockify(blocks: np.ndarray, shape: tuple[int, int], size: int = 8) -> np.ndarray:
    h, w = shape
    return (
        blocks.reshape(h // size, w // size, size, size)
        .transpose(0, 2, 1, 3)
        .reshape(h, w)
    )


def block_dct8(img, strict: bool = False) -> Transform2D:
    """Orthonormal type-II DCT on 8x8 blocks of a grayscale plane."""
    plane = _to_plane(img)
    padded, orig = pad_to_multiple(plane, 8, strict=strict)
    blocks = blockify(padded, 8)
    co = dctn(blocks, type=2, axes=(1, 2), norm="ortho")
    return Transform2D(kind="DCT8", coeffs=unblockify(co, padded.shape, 8), orig_shape=orig)


def block_idct8(t: Transform2D) -> np.ndarray:
    if t.kind != "DCT8":
        raise ValueError("not a DCT8 transform")
    blocks = blockify(t.coeffs, 8)
    rec = idctn(blocks, type=2, axes=(1, 2), norm="ortho")
    plane = unblockify(rec, t.coeffs.shape, 8)
    h, w = t.orig_shape
    return plane[:h, :w]


def haar_dwt(img, strict: bool = False) -> Transform2D:
    """Single-level orthonormal 2-D Haar; LL equals local 2x2 averages times 2."""
    plane = _to_plane(img)
    padded, orig = pad_to_multiple(plane, 2, strict=strict)
    a = padded[0::2, 0::2]
    b = padded[0::2, 1::2]
    c = padded[1::2, 0::2]
    d = padded[1::2, 1::2]
    subbands = {
        "LL": (a + b + c + d) / 2.0,
        "LH": (a - b + c - d) / 2.0,
        "HL": (a + b - c - d) / 2.0,
        "HH": (a - b - c + d) / 2.0,
    }
    return Transform2D(kind="HaarDWT1", subbands=subbands, orig_shape=orig)


def haar_idwt(t: Transform2D) -> np.ndarray:
    if t.kind != "HaarDWT1":
        raise ValueError("not a Haar transform")
    ll, lh, hl, hh = (t.subbands[k] for k in ("LL", "LH", "HL", "HH"))
    hh2, ww2 = ll.shape
    out = np.empty((hh2 * 2, ww2 * 2), dtype=np.float64)
    out[0::2, 0::2] = (ll + lh + hl + hh) / 2.0
    out[0::2, 1::2] = (ll - lh + hl - hh) / 2.0
    out[1::2, 0::2] = (ll + lh - hl - hh) / 2.0
    out[1::2, 1::2] = (ll - lh - hl + hh) / 2.0
    h, w = t.orig_shape
    return out[:h, :w]


def svd_small(m: np.ndarray):
    """SVD of a small (<= 64x64) matrix: m = U @ diag(s) @ Vt."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or max(m.shape) > 64:
        raise GeometryError("svd_small expects a 2-D matrix no larger than 64x64")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix contains NaN/Inf")
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    return u, s, vt
