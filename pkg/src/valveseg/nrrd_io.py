"""Minimal NRRD reader/writer (NRRD0004/0005, raw and gzip encodings).

Covers exactly what the toolkit needs: attached 3D scalar data, keys
dimension/sizes/type/endian/encoding plus space directions and space origin.
Integer inputs are converted to the engine's native float32 on load; masks
round-trip as uint8.
"""

from __future__ import annotations

import gzip
import logging
import re
from pathlib import Path

import numpy as np

from .errors import NrrdFormatError
from .volume import Grid, LabelMask, Volume3D

log = logging.getLogger(__name__)

_TYPE_MAP = {
    "uchar": np.uint8, "unsigned char": np.uint8, "uint8": np.uint8, "uint8_t": np.uint8,
    "signed char": np.int8, "int8": np.int8, "int8_t": np.int8, "char": np.int8,
    "short": np.int16, "short int": np.int16, "signed short": np.int16,
    "int16": np.int16, "int16_t": np.int16,
    "ushort": np.uint16, "unsigned short": np.uint16, "uint16": np.uint16, "uint16_t": np.uint16,
    "float": np.float32, "double": np.float64,
}


def _parse_vector(text: str, field: str) -> np.ndarray:
    m = re.fullmatch(r"\(([^)]*)\)", text.strip())
    if not m:
        raise NrrdFormatError(f"expected '(a,b,c)' vector, got {text!r}", field=field)
    try:
        vals = [float(v) for v in m.group(1).split(",")]
    except ValueError:
        raise NrrdFormatError(f"non-numeric vector component in {text!r}", field=field)
    if len(vals) != 3:
        raise NrrdFormatError(f"expected 3 components, got {len(vals)}", field=field)
    return np.asarray(vals, dtype=np.float64)


def _read_header(fh):
    magic = fh.readline()
    if not re.fullmatch(rb"NRRD000[1-5]\r?\n", magic):
        raise NrrdFormatError(f"not an NRRD file (magic {magic[:16]!r})", field="magic")
    fields = {}
    while True:
        line = fh.readline()
        if line in (b"\n", b"\r\n"):
            break
        if line == b"":
            raise NrrdFormatError("header ended without blank line before data", field="data")
        text = line.decode("ascii", errors="replace").rstrip("\r\n")
        if text.startswith("#"):
            continue
        if ":=" in text:  # key/value pairs: ignored
            continue
        if ":" not in text:
            raise NrrdFormatError(f"malformed header line {text!r}", field=text.split(" ")[0])
        key, value = text.split(":", 1)
        fields[key.strip().lower()] = value.strip()
    return fields


def load_nrrd(path):
    """Load a 3D NRRD file as Volume3D (data converted to float32).

    Missing ``space directions`` fall back to identity orientation and unit
    spacing, with a logged warning.
    """
    path = Path(path)
    with open(path, "rb") as fh:
        return _parse_nrrd(fh, str(path))


def load_nrrd_bytes(payload: bytes) -> Volume3D:
    """Parse NRRD content held in memory."""
    import io
    return _parse_nrrd(io.BytesIO(payload), "<bytes>")


def _parse_nrrd(fh, label: str) -> Volume3D:
    fields = _read_header(fh)
    payload = fh.read()

    if "dimension" not in fields:
        raise NrrdFormatError("missing required field", field="dimension")
    try:
        ndim = int(fields["dimension"])
    except ValueError:
        raise NrrdFormatError(f"non-integer dimension {fields['dimension']!r}", field="dimension")
    if ndim != 3:
        raise NrrdFormatError(f"only 3-D volumes are supported, got dimension {ndim}", field="dimension")

    if "sizes" not in fields:
        raise NrrdFormatError("missing required field", field="sizes")
    try:
        sizes = [int(s) for s in fields["sizes"].split()]
    except ValueError:
        raise NrrdFormatError(f"non-integer sizes {fields['sizes']!r}", field="sizes")
    if len(sizes) != 3 or any(s < 1 for s in sizes):
        raise NrrdFormatError(f"expected 3 positive sizes, got {fields['sizes']!r}", field="sizes")

    tname = fields.get("type")
    if tname is None:
        raise NrrdFormatError("missing required field", field="type")
    dtype = _TYPE_MAP.get(tname.lower())
    if dtype is None:
        raise NrrdFormatError(f"unsupported scalar type {tname!r}", field="type")
    dtype = np.dtype(dtype)

    encoding = fields.get("encoding")
    if encoding is None:
        raise NrrdFormatError("missing required field", field="encoding")
    encoding = encoding.lower()
    if encoding not in ("raw", "gzip", "gz"):
        raise NrrdFormatError(f"unsupported encoding {encoding!r}", field="encoding")

    if dtype.itemsize > 1:
        endian = fields.get("endian")
        if encoding == "raw" and endian is None:
            raise NrrdFormatError("endian is required for raw multi-byte data", field="endian")
        if endian is not None and endian not in ("little", "big"):
            raise NrrdFormatError(f"unsupported endian {endian!r}", field="endian")
        if endian == "big":
            dtype = dtype.newbyteorder(">")
        else:
            dtype = dtype.newbyteorder("<")

    if "data file" in fields or "datafile" in fields:
        raise NrrdFormatError("detached data files are not supported", field="data file")

    if encoding in ("gzip", "gz"):
        try:
            payload = gzip.decompress(payload)
        except (OSError, EOFError) as exc:
            raise NrrdFormatError(f"gzip payload could not be decoded: {exc}", field="encoding")

    expected = int(np.prod(sizes)) * dtype.itemsize
    if len(payload) < expected:
        raise NrrdFormatError(
            f"truncated data payload: expected {expected} bytes, got {len(payload)}", field="data")
    raw = np.frombuffer(payload[:expected], dtype=dtype)
    # NRRD stores the fastest axis first: sizes are (nx, ny, nz), x fastest.
    data = raw.reshape(tuple(reversed(sizes))).transpose(2, 1, 0)

    if "space directions" in fields:
        vec_texts = re.findall(r"\([^)]*\)|none", fields["space directions"])
        if len(vec_texts) != 3:
            raise NrrdFormatError(
                f"expected 3 direction vectors, got {fields['space directions']!r}",
                field="space directions")
        vecs = []
        for t in vec_texts:
            if t == "none":
                raise NrrdFormatError("'none' space direction not supported for scalar volumes",
                                      field="space directions")
            vecs.append(_parse_vector(t, "space directions"))
        vecs = np.stack(vecs, axis=1)  # column a = world step for +1 along axis a
        spacing = np.linalg.norm(vecs, axis=0)
        if np.any(spacing <= 0):
            raise NrrdFormatError("zero-length space direction", field="space directions")
        orientation = vecs / spacing
    else:
        log.warning("%s: no 'space directions' in header; assuming unit spacing, identity orientation",
                    label)
        spacing = np.ones(3)
        orientation = np.eye(3)

    if "space origin" in fields:
        origin = _parse_vector(fields["space origin"], "space origin")
    else:
        origin = np.zeros(3)

    grid = Grid(tuple(sizes), tuple(spacing), origin, orientation)
    return Volume3D(grid, data.astype(np.float32))


def _format_vector(v) -> str:
    return "(" + ",".join(f"{x:.17g}" for x in v) + ")"


def save_nrrd(obj, path, encoding="raw"):
    """Write a Volume3D (float32) or LabelMask (uint8) as an attached NRRD file."""
    with open(Path(path), "wb") as fh:
        fh.write(nrrd_bytes(obj, encoding=encoding))


def nrrd_bytes(obj, encoding="raw") -> bytes:
    """Serialize a Volume3D (float32) or LabelMask (uint8) to NRRD bytes."""
    if encoding not in ("raw", "gzip"):
        raise ValueError(f"encoding must be 'raw' or 'gzip', got {encoding!r}")
    if isinstance(obj, LabelMask):
        data = obj.data.astype(np.uint8)
        tname = "uint8"
    else:
        data = np.asarray(obj.data, dtype=np.float32)
        tname = "float"
    grid = obj.grid
    dirs = grid.orientation * np.asarray(grid.spacing)  # columns scaled by spacing

    lines = [
        "NRRD0005",
        "# produced by valveseg",
        "type: " + tname,
        "dimension: 3",
        "space dimension: 3",
        f"sizes: {grid.dims[0]} {grid.dims[1]} {grid.dims[2]}",
        "space directions: " + " ".join(_format_vector(dirs[:, a]) for a in range(3)),
        "space origin: " + _format_vector(grid.origin),
        "kinds: domain domain domain",
        "endian: little",
        "encoding: " + encoding,
    ]
    header = "\n".join(lines) + "\n\n"
    payload = np.ascontiguousarray(data.transpose(2, 1, 0)).astype(data.dtype.newbyteorder("<")).tobytes()
    if encoding == "gzip":
        payload = gzip.compress(payload, mtime=0)
    return header.encode("ascii") + payload


def load_mask(path) -> LabelMask:
    """Load an NRRD as a binary mask (nonzero samples are inside)."""
    vol = load_nrrd(path)
    return LabelMask(vol.grid, vol.data != 0)
