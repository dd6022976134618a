"""Grayscale image files: binary PGM read/write, PNG read.

Images are returned as float64 arrays of shape ``(H, W)`` holding values in
``[0, 255]``. Colour PNGs are reduced to luminance with
``0.299 R + 0.587 G + 0.114 B``.
"""

from pathlib import Path

import numpy as np

from .errors import FormatError

SUPPORTED_SUFFIXES = (".pgm", ".png")
LUMA = np.array([0.299, 0.587, 0.114])


def _pgm_tokens(buf):
    """Yield ``(token, end_offset)`` for the four header fields of a PNM file."""
    pos = 0
    n = len(buf)
    for _ in range(4):
        while pos < n:
            ch = buf[pos : pos + 1]
            if ch == b"#":
                while pos < n and buf[pos : pos + 1] not in (b"\n", b"\r"):
                    pos += 1
            elif ch.isspace():
                pos += 1
            else:
                break
        start = pos
        while pos < n and not buf[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError("truncated PGM header", offset=pos)
        yield buf[start:pos], pos


def decode_pgm(buf):
    tokens = list(_pgm_tokens(buf))
    magic, (w_tok, _), (h_tok, _), (max_tok, end) = tokens[0][0], tokens[1], tokens[2], tokens[3]
    if magic != b"P5":
        raise FormatError(f"not a binary PGM (magic {magic!r})", offset=0)
    try:
        width, height, maxval = int(w_tok), int(h_tok), int(max_tok)
    except ValueError:
        raise FormatError("non-numeric PGM header field", offset=end) from None
    if width < 1 or height < 1:
        raise FormatError(f"bad PGM dimensions {width}x{height}", offset=end)
    if not 0 < maxval < 65536:
        raise FormatError(f"bad PGM maxval {maxval}", offset=end)
    start = end + 1  # exactly one whitespace byte after maxval
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype(np.uint8)
    need = width * height * dtype.itemsize
    if len(buf) - start < need:
        raise FormatError(f"PGM pixel data truncated: need {need} bytes, have {len(buf) - start}", offset=len(buf))
    pixels = np.frombuffer(buf, dtype=dtype, count=width * height, offset=start).reshape(height, width)
    return pixels.astype(np.float64) * (255.0 / maxval)


def encode_pgm(pixels):
    """Encode to ``P5`` with maxval 255, rounding and clamping to 8 bits."""
    arr = np.asarray(pixels, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"PGM needs a 2-d image, got shape {arr.shape}")
    data = np.clip(np.rint(arr), 0, 255).astype(np.uint8)
    header = f"P5\n{arr.shape[1]} {arr.shape[0]}\n255\n".encode("ascii")
    return header + data.tobytes()


def read_pgm(path):
    return decode_pgm(Path(path).read_bytes())


def write_pgm(path, pixels):
    Path(path).write_bytes(encode_pgm(pixels))


def read_png(path):
    from PIL import Image, UnidentifiedImageError

    try:
        with Image.open(path) as im:
            im.load()
            if im.mode in ("L", "I;16", "I"):
                arr = np.asarray(im, dtype=np.float64)
                if im.mode != "L":
                    arr = arr * (255.0 / 65535.0)
                return arr
            if im.mode in ("LA", "P", "PA", "RGBA", "1"):
                im = im.convert("RGB")
            if im.mode != "RGB":
                raise FormatError(f"unsupported PNG mode {im.mode}")
            return np.asarray(im, dtype=np.float64) @ LUMA
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise FormatError(f"cannot decode PNG {path}: {exc}") from None


def read_image(path):
    """Read a ``.pgm`` or ``.png`` file into a float64 ``(H, W)`` array."""
    suffix = Path(path).suffix.lower()
    if suffix == ".pgm":
        return read_pgm(path)
    if suffix == ".png":
        return read_png(path)
    raise FormatError(
        f"unsupported image format {suffix!r} for {path}; convert to PGM (P5) or PNG, "
        "e.g. `convert in.jpg -colorspace Gray out.pgm`"
    )
