"""Image container conventions, PGM I/O, seeded noise and quality metrics.

Images are 2-D float64 arrays indexed ``img[i, j]``: ``i`` is the horizontal
coordinate (column, ``t1 = i/n``) and ``j`` the vertical coordinate with
``t2 = j/n`` increasing upward. PGM files store rows top-to-bottom, so the
reader and writer flip the vertical axis.

Noise uses numpy's PCG64 bit generator and its ziggurat ``standard_normal``
sampler; both are platform independent, so seeded outputs are portable.
"""

import math
import os

import numpy as np

from ._validation import check_image, check_nonnegative, check_same_shape

__all__ = [
    "PGMError",
    "MalformedHeaderError",
    "TruncatedDataError",
    "UnsupportedFormatError",
    "load_pgm",
    "save_pgm",
    "from_rows",
    "to_rows",
    "make_rng",
    "add_gaussian_noise",
    "mse",
    "psnr",
]

_WHITESPACE = b" \t\n\r\v\f"


class PGMError(ValueError):
    """Base class for PGM parse failures."""


class MalformedHeaderError(PGMError):
    pass


class TruncatedDataError(PGMError):
    pass


class UnsupportedFormatError(PGMError):
    pass


def from_rows(rows):
    """Convert a top-to-bottom row array (``rows[r, c]``) to ``img[i, j]``."""
    rows = np.asarray(rows, dtype=np.float64)
    return np.ascontiguousarray(rows[::-1].T)


def to_rows(image):
    """Inverse of :func:`from_rows`."""
    return np.ascontiguousarray(np.asarray(image)[:, ::-1].T)


def _read_header(data):
    """Parse magic, width, height and maxval; return them with the payload offset."""
    fields = []
    pos = 0
    while len(fields) < 4:
        while pos < len(data) and data[pos] in _WHITESPACE:
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and data[pos] not in _WHITESPACE and data[pos : pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise MalformedHeaderError("unexpected end of header")
        fields.append(data[start:pos])
        if len(fields) == 1:
            magic = fields[0]
            if magic in (b"P1", b"P3", b"P4", b"P6", b"P7"):
                raise UnsupportedFormatError(f"unsupported magic {magic.decode('ascii', 'replace')}")
            if magic not in (b"P2", b"P5"):
                raise MalformedHeaderError(f"not a PGM file (magic {magic[:8]!r})")
    magic = fields[0].decode("ascii")
    try:
        width, height, maxval = (int(f) for f in fields[1:])
    except ValueError:
        raise MalformedHeaderError(f"non-integer header field in {fields[1:]!r}") from None
    if width < 1 or height < 1:
        raise MalformedHeaderError(f"bad dimensions {width}x{height}")
    if not 1 <= maxval <= 65535:
        raise MalformedHeaderError(f"maxval {maxval} outside [1, 65535]")
    # exactly one whitespace byte separates the header from a binary raster
    if pos >= len(data):
        if magic == "P5":
            raise TruncatedDataError("missing raster")
    else:
        pos += 1
    return magic, width, height, maxval, pos


def load_pgm(path):
    """Read a P2 or P5 PGM file and return intensities scaled to [0, 1].

    Raises
    ------
    UnsupportedFormatError
        For other Netpbm magics (P1, P3, P4, P6, P7).
    MalformedHeaderError
        For unreadable headers or out-of-range fields.
    TruncatedDataError
        When the raster holds fewer samples than the header promises.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    magic, width, height, maxval, pos = _read_header(data)
    count = width * height
    if magic == "P5":
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        nbytes = count * dtype.itemsize
        if len(data) - pos < nbytes:
            raise TruncatedDataError(f"expected {nbytes} raster bytes, found {len(data) - pos}")
        values = np.frombuffer(data, dtype=dtype, count=count, offset=pos).astype(np.int64)
    else:
        tokens = data[pos:].split()
        tokens = [t for t in tokens if not t.startswith(b"#")]
        if len(tokens) < count:
            raise TruncatedDataError(f"expected {count} samples, found {len(tokens)}")
        try:
            values = np.array([int(t) for t in tokens[:count]], dtype=np.int64)
        except ValueError:
            raise MalformedHeaderError("non-integer sample in P2 raster") from None
    if values.size and (values.min() < 0 or values.max() > maxval):
        raise MalformedHeaderError(f"sample outside [0, {maxval}]")
    rows = values.reshape(height, width).astype(np.float64) / maxval
    return from_rows(rows)


def save_pgm(image, path, maxval=255):
    """Write ``image`` as a binary P5 PGM.

    Intensities are clamped to [0, 1], scaled by ``maxval`` and rounded half
    up. Clamping happens only here; the in-memory pipeline keeps raw values.
    """
    if maxval not in (255, 65535):
        raise ValueError(f"maxval must be 255 or 65535, got {maxval}")
    img = check_image(image)
    q = np.floor(np.clip(img, 0.0, 1.0) * maxval + 0.5)
    rows = to_rows(q)
    dtype = ">u2" if maxval > 255 else "u1"
    height, width = rows.shape
    header = f"P5\n{width} {height}\n{maxval}\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(rows.astype(dtype).tobytes())


def make_rng(seed):
    """The repository-wide generator: PCG64 seeded with a 64-bit integer."""
    return np.random.Generator(np.random.PCG64(int(seed) & 0xFFFFFFFFFFFFFFFF))


def add_gaussian_noise(image, xi, seed):
    """Return ``image + N(0, xi**2)`` noise drawn from the seeded generator.

    The result is not clamped.
    """
    img = check_image(image)
    xi = check_nonnegative(xi, "xi")
    if xi == 0:
        return img.copy()
    noise = make_rng(seed).standard_normal(img.shape)
    return img + xi * noise


def mse(a, b):
    a = check_image(a, "a")
    b = check_image(b, "b")
    check_same_shape(a, b)
    d = a - b
    return float(np.mean(d * d))


def psnr(a, b, peak=1.0):
    """Peak signal-to-noise ratio in dB; ``math.inf`` when the images agree."""
    if not peak > 0:
        raise ValueError(f"peak must be > 0, got {peak}")
    err = mse(a, b)
    if err == 0:
        return math.inf
    return 10.0 * math.log10(peak * peak / err)


def ensure_parent(path):
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
