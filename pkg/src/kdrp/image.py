"""8-bit raster images, binary PGM/PPM codecs, and region drawing.

Images are immutable: the pixel array is flagged non-writeable at
construction.  Decoding is bit-exact and restricted to maxval 255 so a
decode/encode round trip is the identity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Image",
    "ColorImage",
    "Region",
    "PnmError",
    "PnmHeaderError",
    "PnmUnsupportedError",
    "PnmTruncatedError",
    "decode_pnm",
    "encode_pgm",
    "encode_ppm",
    "draw_regions",
    "PALETTE",
]


class PnmError(ValueError):
    """Base class for PGM/PPM codec failures."""


class PnmHeaderError(PnmError):
    """Header is malformed: bad magic, missing fields, non-numeric sizes."""


class PnmUnsupportedError(PnmError):
    """Header parses but asks for something the codec refuses (e.g. maxval
    other than 255, or an ASCII variant)."""


class PnmTruncatedError(PnmError):
    """Header promises more pixel payload than the buffer holds."""


def _as_readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Image:
    """Grayscale raster: pixels is (height, width) uint8, read-only."""

    width: int
    height: int
    pixels: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image dimensions must be positive")
        px = np.asarray(self.pixels)
        if px.dtype != np.uint8:
            raise ValueError("pixels must be uint8")
        if px.shape != (self.height, self.width):
            raise ValueError(
                "pixel buffer shape %r does not match %dx%d"
                % (px.shape, self.width, self.height)
            )
        object.__setattr__(self, "pixels", _as_readonly(px))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Image):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and np.array_equal(self.pixels, other.pixels)
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class ColorImage:
    """RGB raster: pixels is (height, width, 3) uint8, read-only."""

    width: int
    height: int
    pixels: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image dimensions must be positive")
        px = np.asarray(self.pixels)
        if px.dtype != np.uint8:
            raise ValueError("pixels must be uint8")
        if px.shape != (self.height, self.width, 3):
            raise ValueError(
                "pixel buffer shape %r does not match %dx%dx3"
                % (px.shape, self.width, self.height)
            )
        object.__setattr__(self, "pixels", _as_readonly(px))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ColorImage):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and np.array_equal(self.pixels, other.pixels)
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True, order=True)
class Region:
    """Axis-aligned rectangle, half-open: columns [x, x+w), rows [y, y+h)."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self) -> None:
        if self.w <= 0 or self.h <= 0:
            raise ValueError("region must have positive width and height")
        if self.x < 0 or self.y < 0:
            raise ValueError("region origin must be non-negative")

    def validate(self, width: int, height: int) -> "Region":
        """Check containment in a width x height image; returns self."""
        if self.x + self.w > width or self.y + self.h > height:
            raise ValueError(
                "region %r exceeds %dx%d bounds" % (self, width, height)
            )
        return self

    @property
    def area(self) -> int:
        return self.w * self.h


# --- PGM/PPM (Netpbm binary) -------------------------------------------------

_WS = b" \t\r\n"


def _read_token(buf: bytes, pos: int) -> tuple[bytes, int]:
    """Next whitespace-delimited header token; '#' starts a comment that runs
    to end of line."""
    n = len(buf)
    while pos < n:
        c = buf[pos:pos + 1]
        if c == b"#":
            nl = buf.find(b"\n", pos)
            if nl < 0:
                raise PnmHeaderError("unterminated header comment")
            pos = nl + 1
        elif c in _WS:
            pos += 1
        else:
            break
    if pos >= n:
        raise PnmHeaderError("header ended before all fields were read")
    start = pos
    while pos < n and buf[pos:pos + 1] not in _WS and buf[pos:pos + 1] != b"#":
        pos += 1
    return buf[start:pos], pos


def _read_int(buf: bytes, pos: int, what: str) -> tuple[int, int]:
    tok, pos = _read_token(buf, pos)
    if not tok.isdigit():
        raise PnmHeaderError("%s is not a decimal integer: %r" % (what, tok))
    return int(tok), pos


def decode_pnm(data: bytes) -> Image:
    """Decode binary PGM (P5) or PPM (P6) bytes.

    P6 pixels collapse to luminance with integer-rounded Rec.601 weights:
    Y = (299 R + 587 G + 114 B + 500) // 1000.  Only maxval 255 is accepted.
    """
    data = bytes(data)
    if len(data) < 2:
        raise PnmHeaderError("buffer too short for a magic number")
    magic = data[:2]
    if magic in (b"P1", b"P2", b"P3", b"P4"):
        raise PnmUnsupportedError(
            "unsupported magic %r: only binary P5/P6 are handled" % magic
        )
    if magic not in (b"P5", b"P6"):
        raise PnmHeaderError("unrecognized magic %r" % magic)
    width, pos = _read_int(data, 2, "width")
    height, pos = _read_int(data, pos, "height")
    maxval, pos = _read_int(data, pos, "maxval")
    if width <= 0 or height <= 0:
        raise PnmHeaderError("dimensions must be positive")
    if maxval != 255:
        # rejected, not rescaled: anything else cannot round-trip bit-exactly
        raise PnmUnsupportedError("maxval must be 255, got %d" % maxval)
    if pos >= len(data):
        raise PnmTruncatedError("no pixel payload after header")
    if data[pos:pos + 1] not in _WS:
        raise PnmHeaderError("missing whitespace byte after maxval")
    pos += 1
    channels = 1 if magic == b"P5" else 3
    need = width * height * channels
    payload = data[pos:pos + need]
    if len(payload) < need:
        raise PnmTruncatedError(
            "payload holds %d bytes, header promises %d" % (len(payload), need)
        )
    flat = np.frombuffer(payload, dtype=np.uint8, count=need)
    if channels == 1:
        return Image(width, height, flat.reshape(height, width).copy())
    rgb = flat.reshape(height, width, 3).astype(np.int32)
    lum = (299 * rgb[:, :, 0] + 587 * rgb[:, :, 1] + 114 * rgb[:, :, 2] + 500) // 1000
    return Image(width, height, lum.astype(np.uint8))


def encode_pgm(image: Image) -> bytes:
    """Binary PGM bytes; decode_pnm(encode_pgm(img)) == img."""
    header = b"P5\n%d %d\n255\n" % (image.width, image.height)
    return header + image.pixels.tobytes()


def encode_ppm(image: ColorImage) -> bytes:
    """Binary PPM bytes for a color raster."""
    header = b"P6\n%d %d\n255\n" % (image.width, image.height)
    return header + image.pixels.tobytes()


# distinct-hue outline colors, cycled by display class
PALETTE: tuple[tuple[int, int, int], ...] = (
    (230, 57, 70),
    (46, 196, 96),
    (66, 135, 245),
    (255, 183, 3),
    (155, 93, 229),
    (0, 187, 173),
    (244, 114, 182),
    (148, 108, 61),
)


def draw_regions(
    image: Image, regions: list[tuple[Region, int]]
) -> ColorImage:
    """Color copy of the image with a 1-pixel outline per (region, class).

    Outline color cycles through PALETTE by class id.  The input image is
    never modified; pixels outside region perimeters are the gray value
    replicated into all three channels.
    """
    rgb = np.repeat(image.pixels[:, :, None], 3, axis=2).copy()
    for region, cls in regions:
        region.validate(image.width, image.height)
        color = np.array(PALETTE[cls % len(PALETTE)], dtype=np.uint8)
        x0, y0 = region.x, region.y
        x1, y1 = region.x + region.w - 1, region.y + region.h - 1
        rgb[y0, x0:x1 + 1] = color
        rgb[y1, x0:x1 + 1] = color
        rgb[y0:y1 + 1, x0] = color
        rgb[y0:y1 + 1, x1] = color
    return ColorImage(image.width, image.height, rgb)
