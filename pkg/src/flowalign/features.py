"""Image loading, HOG descriptors, cosine matching cost, and FVEC descriptor files."""

from dataclasses import dataclass

import numpy as np


class PgmParseError(ValueError):
    """Raised on malformed PGM input; the message names the offending field."""


class FvecFormatError(ValueError):
    """Raised on malformed FVEC descriptor files."""


class DimensionMismatchError(ValueError):
    """Raised when two descriptors of different lengths are compared."""


_WS = (9, 10, 11, 12, 13, 32)  # PGM token separators


@dataclass(frozen=True)
class Image:
    """8-bit grayscale image, row-major raster."""

    width: int
    height: int
    pixels: bytes

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"bad image dimensions {self.width}x{self.height}")
        if len(self.pixels) != self.width * self.height:
            raise ValueError(
                f"raster length {len(self.pixels)} != {self.width}x{self.height}"
            )

    def as_array(self) -> np.ndarray:
        return np.frombuffer(self.pixels, dtype=np.uint8).reshape(
            self.height, self.width
        )


def _next_token(data: bytes, pos: int, field: str) -> tuple[bytes, int]:
    n = len(data)
    while pos < n:
        c = data[pos]
        if c in _WS:
            pos += 1
        elif c == 0x23:  # '#' comment runs to end of line
            while pos < n and data[pos] not in (10, 13):
                pos += 1
        else:
            break
    if pos >= n:
        raise PgmParseError(f"{field}: unexpected end of header")
    start = pos
    while pos < n and data[pos] not in _WS and data[pos] != 0x23:
        pos += 1
    return data[start:pos], pos


def _int_token(data: bytes, pos: int, field: str) -> tuple[int, int]:
    tok, pos = _next_token(data, pos, field)
    if not tok.isdigit():
        raise PgmParseError(f"{field}: expected integer, got {tok!r}")
    return int(tok), pos


def load_pgm(data: bytes) -> Image:
    """Decode a binary PGM ("P5") byte stream.

    Header comments (``#`` to end of line) may appear between tokens. The
    raster must contain exactly width*height single-byte samples, so only
    maxval <= 255 is accepted.
    """
    magic, pos = _next_token(data, 0, "magic")
    if magic != b"P5":
        raise PgmParseError(f"magic: expected b'P5', got {magic!r}")
    width, pos = _int_token(data, pos, "width")
    height, pos = _int_token(data, pos, "height")
    maxval, pos = _int_token(data, pos, "maxval")
    if width < 1:
        raise PgmParseError(f"width: must be >= 1, got {width}")
    if height < 1:
        raise PgmParseError(f"height: must be >= 1, got {height}")
    if not 1 <= maxval <= 255:
        raise PgmParseError(f"maxval: must be in [1, 255], got {maxval}")
    if pos >= len(data) or data[pos] not in _WS:
        raise PgmParseError("raster: missing single whitespace after maxval")
    pos += 1
    raster = data[pos : pos + width * height]
    if len(raster) < width * height:
        raise PgmParseError(
            f"raster: truncated, expected {width * height} bytes, got {len(raster)}"
        )
    return Image(width, height, bytes(raster))


def compute_hog(img: Image, cell_size: int = 30, bins: int = 50) -> np.ndarray:
    """Histogram-of-oriented-gradients descriptor of a grayscale image.

    The image is split into non-overlapping cell_size x cell_size cells
    anchored at the top-left corner; trailing pixels that do not fill a cell
    are discarded. Gradients come from central differences with replicated
    borders. Each pixel votes its gradient magnitude into one of `bins`
    equal-width unsigned-orientation bins over [0, 180) degrees. Cell
    histograms are concatenated row-major (left-to-right, top-to-bottom).

    Returns a float vector of length (width//cell_size)*(height//cell_size)*bins.
    """
    if cell_size < 1 or bins < 1:
        raise ValueError("cell_size and bins must be positive")
    if img.width < cell_size or img.height < cell_size:
        raise ValueError(
            f"image {img.width}x{img.height} smaller than one {cell_size}x{cell_size} cell"
        )
    a = img.as_array().astype(np.float64)
    padded = np.pad(a, 1, mode="edge")
    gx = (padded[1:-1, 2:] - padded[1:-1, :-2]) / 2.0
    gy = (padded[2:, 1:-1] - padded[:-2, 1:-1]) / 2.0

    cells_x = img.width // cell_size
    cells_y = img.height // cell_size
    h = cells_y * cell_size
    w = cells_x * cell_size
    gx = gx[:h, :w]
    gy = gy[:h, :w]

    mag = np.hypot(gx, gy)
    ang = np.arctan2(gy, gx) % np.pi  # unsigned orientation in [0, pi)
    idx = np.minimum((ang * (bins / np.pi)).astype(np.intp), bins - 1)

    rows, cols = np.indices((h, w), sparse=True)
    cell = (rows // cell_size) * cells_x + (cols // cell_size)
    flat = cell * bins + idx
    hist = np.bincount(flat.ravel(), weights=mag.ravel(), minlength=cells_y * cells_x * bins)
    return hist


def cosine_cost(a: np.ndarray, b: np.ndarray) -> float:
    """Matching cost 1 - cos(angle between a and b), in [0, 2].

    A zero-norm operand makes the angle undefined; the worst cost 2.0 is
    returned so degenerate descriptors never win a match.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 1 or b.ndim != 1 or a.shape != b.shape:
        raise DimensionMismatchError(f"descriptor shapes differ: {a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 2.0
    c = 1.0 - float(np.dot(a, b)) / (na * nb)
    return min(max(c, 0.0), 2.0)


def write_fvec(descs, sink) -> None:
    """Write descriptors as a text FVEC stream: "FVEC <count> <dim>" then one
    space-separated row per descriptor (12 significant digits)."""
    arr = np.atleast_2d(np.asarray(descs, dtype=np.float64))
    count = arr.shape[0] if arr.size else 0
    dim = arr.shape[1] if count else 0
    lines = [f"FVEC {count} {dim}"]
    for row in arr[:count]:
        lines.append(" ".join(format(x, ".12g") for x in row))
    payload = ("\n".join(lines) + "\n").encode("ascii")
    sink.write(payload)


def read_fvec(source) -> np.ndarray:
    """Inverse of write_fvec; returns an array of shape (count, dim)."""
    data = source.read()
    if isinstance(data, bytes):
        data = data.decode("ascii")
    lines = [ln for ln in data.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("FVEC"):
        raise FvecFormatError("missing FVEC header")
    parts = lines[0].split()
    if len(parts) != 3:
        raise FvecFormatError(f"malformed header: {lines[0]!r}")
    try:
        count, dim = int(parts[1]), int(parts[2])
    except ValueError as exc:
        raise FvecFormatError(f"non-numeric header field in {lines[0]!r}") from exc
    rows = lines[1:]
    if len(rows) != count:
        raise FvecFormatError(f"header says {count} rows, found {len(rows)}")
    out = np.empty((count, dim), dtype=np.float64)
    for r, line in enumerate(rows):
        toks = line.split()
        if len(toks) != dim:
            raise FvecFormatError(f"row {r}: expected {dim} values, found {len(toks)}")
        try:
            out[r] = [float(t) for t in toks]
        except ValueError as exc:
            raise FvecFormatError(f"row {r}: non-numeric token") from exc
    return out
