"""File formats: NPY v1.0 tensors and PNG masks/labels/overlays.

Scalar maps are stored as little-endian float32, masks as uint8 (0/1),
label maps as little-endian uint16 or uint32. Only 2D, C-ordered,
little-endian payloads are accepted; anything else is rejected with a
FormatError that names the byte offset of the offending field. The writer
is deterministic so identical arrays serialize to identical bytes.
"""

import ast

import numpy as np
from PIL import Image

MAGIC = b"\x93NUMPY"

_WRITE_DTYPES = {
    np.dtype(np.float32): "<f4",
    np.dtype(np.float64): "<f4",   # internal 64-bit narrows at the file boundary
    np.dtype(np.uint8): "|u1",
    np.dtype(np.bool_): "|u1",
    np.dtype(np.uint16): "<u2",
    np.dtype(np.uint32): "<u4",
    np.dtype(np.int32): "<u4",
}

_READ_DTYPES = {
    "<f4": np.dtype("<f4"),
    "|u1": np.dtype("u1"),
    "<u2": np.dtype("<u2"),
    "<u4": np.dtype("<u4"),
}


class FormatError(ValueError):
    """Malformed or unsupported NPY content."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


def write_array(path, array):
    """Serialize a 2D array to an NPY v1.0 file.

    float inputs are written as float32, bool as uint8, integer labels as
    uint16 when they fit and uint32 otherwise.
    """
    arr = np.asarray(array)
    if arr.ndim != 2:
        raise FormatError(f"only 2D arrays are supported, got shape {arr.shape}")
    if arr.dtype not in _WRITE_DTYPES:
        raise FormatError(f"unsupported dtype {arr.dtype}")
    descr = _WRITE_DTYPES[arr.dtype]
    if arr.dtype == np.int32:
        if arr.min() < 0:
            raise FormatError("label arrays must be non-negative")
        descr = "<u2" if arr.max() <= np.iinfo(np.uint16).max else "<u4"
    payload = np.ascontiguousarray(arr.astype(_READ_DTYPES[descr]))

    header = (
        f"{{'descr': '{descr}', 'fortran_order': False, "
        f"'shape': {(arr.shape[0], arr.shape[1])!r}, }}"
    )
    # pad so magic + version + length field + header is a multiple of 64
    unpadded = len(MAGIC) + 2 + 2 + len(header) + 1
    header = header + " " * (-unpadded % 64) + "\n"
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(bytes([1, 0]))
        fh.write(len(header).to_bytes(2, "little"))
        fh.write(header.encode("latin1"))
        fh.write(payload.tobytes())


def read_array(path):
    """Read a 2D array from an NPY v1.0 file written by this module (or any
    compliant writer using a supported dtype)."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 10:
        raise FormatError("file too short for an NPY header", offset=0)
    if data[:6] != MAGIC:
        raise FormatError("bad magic bytes", offset=0)
    if data[6:8] != bytes([1, 0]):
        raise FormatError(f"unsupported NPY version {data[6]}.{data[7]}", offset=6)
    header_len = int.from_bytes(data[8:10], "little")
    header_end = 10 + header_len
    if len(data) < header_end:
        raise FormatError("truncated header", offset=8)
    try:
        header = ast.literal_eval(data[10:header_end].decode("latin1"))
    except (ValueError, SyntaxError) as exc:
        raise FormatError(f"unparseable header dict: {exc}", offset=10) from exc
    if not isinstance(header, dict) or set(header) != {"descr", "fortran_order", "shape"}:
        raise FormatError("header must contain exactly descr/fortran_order/shape",
                          offset=10)
    descr = header["descr"]
    if isinstance(descr, str) and descr.startswith(">"):
        raise FormatError(f"big-endian dtype {descr!r} is not supported", offset=10)
    if descr not in _READ_DTYPES:
        raise FormatError(f"unsupported dtype {descr!r}", offset=10)
    if header["fortran_order"] is not False:
        raise FormatError("fortran_order must be False", offset=10)
    shape = header["shape"]
    if not (isinstance(shape, tuple) and len(shape) == 2
            and all(isinstance(s, int) and s >= 1 for s in shape)):
        raise FormatError(f"shape must be a 2D tuple, got {shape!r}", offset=10)
    dtype = _READ_DTYPES[descr]
    expected = shape[0] * shape[1] * dtype.itemsize
    if len(data) - header_end != expected:
        raise FormatError(
            f"payload is {len(data) - header_end} bytes, expected {expected}",
            offset=header_end,
        )
    return np.frombuffer(data[header_end:], dtype=dtype).reshape(shape).copy()


def read_scalar_map(path):
    arr = read_array(path)
    if arr.dtype != np.dtype("<f4"):
        raise FormatError(f"{path}: expected float32 scalar map, got {arr.dtype}")
    return arr.astype(np.float64)


def read_mask(path):
    arr = read_array(path)
    if arr.dtype != np.dtype("u1"):
        raise FormatError(f"{path}: expected uint8 mask, got {arr.dtype}")
    return arr > 0


def read_labels(path):
    arr = read_array(path)
    if arr.dtype not in (np.dtype("<u2"), np.dtype("<u4")):
        raise FormatError(f"{path}: expected uint16/uint32 labels, got {arr.dtype}")
    return arr.astype(np.int32)


def write_mask_png(path, mask):
    Image.fromarray(np.asarray(mask, dtype=bool).astype(np.uint8) * 255,
                    mode="L").save(path)


def read_mask_png(path):
    return np.asarray(Image.open(path)) > 0


def write_labels_png(path, labels):
    arr = np.asarray(labels)
    if arr.min() < 0 or arr.max() > np.iinfo(np.uint16).max:
        raise FormatError("labels out of 16-bit range")
    Image.fromarray(arr.astype(np.uint16)).save(path)


def read_labels_png(path):
    return np.asarray(Image.open(path)).astype(np.int32)


def _palette(n):
    """n visually distinct RGB colors, deterministic in n."""
    hues = (np.arange(n) * 0.61803398875) % 1.0
    colors = np.zeros((n, 3), dtype=np.uint8)
    for i, h in enumerate(hues):
        r, g, b = _hsv_to_rgb(h, 0.75, 0.95)
        colors[i] = (int(r * 255), int(g * 255), int(b * 255))
    return colors


def _hsv_to_rgb(h, s, v):
    i = int(h * 6.0) % 6
    f = h * 6.0 - int(h * 6.0)
    p, q, t = v * (1 - s), v * (1 - s * f), v * (1 - s * (1 - f))
    return [(v, t, p), (q, v, p), (p, v, t), (p, q, v), (t, p, v), (v, p, q)][i]


def write_overlay_png(path, labels, centroids):
    """Color each instance distinctly and mark centroids with white dots."""
    labels = np.asarray(labels)
    h, w = labels.shape
    n = int(labels.max())
    rgb = np.zeros((h, w, 3), dtype=np.uint8)
    if n > 0:
        colors = np.vstack([[[0, 0, 0]], _palette(n)])
        rgb = colors[np.clip(labels, 0, n)]
    for x, y in np.asarray(centroids).reshape(-1, 2):
        cy, cx = int(round(y)), int(round(x))
        y0, y1 = max(cy - 2, 0), min(cy + 3, h)
        x0, x1 = max(cx - 2, 0), min(cx + 3, w)
        rgb[y0:y1, x0:x1] = 255
    Image.fromarray(rgb.astype(np.uint8), mode="RGB").save(path)
