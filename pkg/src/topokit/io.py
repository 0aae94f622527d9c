"""File formats: raw float grids, binary PGM masks and the CSV tables."""
from __future__ import annotations

import csv
import json
import re
from pathlib import Path

import numpy as np

from .grid import InvalidArgument

GRID_SUFFIXES = (".raw", ".bin", ".f32")


class FormatError(ValueError):
    """Malformed or unreadable input file."""


def write_raw(path, grid) -> None:
    """One JSON header line, then little-endian float32 values in row-major order."""
    a = np.asarray(grid, dtype="<f4")
    header = json.dumps({"dims": list(a.shape), "order": "row-major"}, sort_keys=True)
    with open(path, "wb") as fh:
        fh.write(header.encode() + b"\n")
        fh.write(np.ascontiguousarray(a).tobytes())


def read_raw(path) -> np.ndarray:
    data = Path(path).read_bytes()
    nl = data.find(b"\n")
    if nl < 0:
        raise FormatError(f"{path}: missing header line")
    try:
        header = json.loads(data[:nl])
        dims = [int(d) for d in header["dims"]]
    except (ValueError, KeyError, TypeError) as e:
        raise FormatError(f"{path}: bad header ({e})") from None
    if header.get("order", "row-major") != "row-major":
        raise FormatError(f"{path}: unsupported order {header.get('order')!r}")
    body = data[nl + 1:]
    n = int(np.prod(dims))
    if len(body) != 4 * n:
        raise FormatError(f"{path}: expected {4 * n} data bytes for dims {dims}, found {len(body)}")
    return np.frombuffer(body, dtype="<f4").reshape(dims).astype(np.float64)


def write_pgm(path, mask) -> None:
    """Binary P5 image, maxval 255, foreground 255."""
    m = np.asarray(mask)
    if m.ndim != 2:
        raise InvalidArgument(f"mask: PGM holds 2D images only, got shape {m.shape}")
    px = np.where(m.astype(bool), 255, 0).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{m.shape[1]} {m.shape[0]}\n255\n".encode())
        fh.write(px.tobytes())


_PGM_TOKEN = re.compile(rb"(?:\s|#[^\n]*\n)*(\S+)")


def read_pgm_values(path) -> np.ndarray:
    """Pixel values scaled to [0, 1]."""
    data = Path(path).read_bytes()
    pos = 0
    tokens = []
    for _ in range(4):
        m = _PGM_TOKEN.match(data, pos)
        if not m:
            raise FormatError(f"{path}: truncated PGM header")
        tokens.append(m.group(1))
        pos = m.end()
    if tokens[0] != b"P5":
        raise FormatError(f"{path}: not a binary PGM (magic {tokens[0]!r})")
    try:
        w, h, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise FormatError(f"{path}: bad PGM header") from None
    if not 0 < maxval < 65536:
        raise FormatError(f"{path}: maxval {maxval} out of range")
    pos += 1   # single whitespace before the raster
    dtype = np.uint8 if maxval < 256 else ">u2"
    size = w * h * (1 if maxval < 256 else 2)
    body = data[pos:pos + size]
    if len(body) != size:
        raise FormatError(f"{path}: expected {size} raster bytes, found {len(body)}")
    return np.frombuffer(body, dtype=dtype).reshape(h, w).astype(np.float64) / maxval


def read_grid(path) -> np.ndarray:
    path = Path(path)
    if path.suffix.lower() == ".pgm":
        return read_pgm_values(path)
    return read_raw(path)


def read_mask(path) -> np.ndarray:
    return read_grid(path) >= 0.5


def write_mask(path, mask) -> None:
    """PGM for 2D .pgm paths, raw grids of 0/1 otherwise."""
    m = np.asarray(mask, bool)
    if Path(path).suffix.lower() == ".pgm":
        write_pgm(path, m)
    else:
        write_raw(path, m.astype(np.float32))


def _fmt(x) -> str:
    return repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)


def write_csv(path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_diagram_csv(path, dgm) -> None:
    rows = []
    for i in range(len(dgm)):
        death = np.inf if dgm.essential[i] else float(dgm.death[i])
        rows.append((int(dgm.dim[i]), float(dgm.birth[i]), death,
                     int(dgm.birth_cell[i]), int(dgm.death_cell[i])))
    write_csv(path, ["dim", "birth", "death", "birth_cell", "death_cell"], rows)


def write_targets_csv(path, targets) -> None:
    write_csv(path, ["cell", "current", "target", "role"],
              [(t.pixel, float(t.current), float(t.target), t.role) for t in targets])


def write_branches_csv(path, family) -> None:
    write_csv(path, ["branch_id", "persistence", "pixel_count"],
              [(i, float(b.persistence), int(b.pixels.size)) for i, b in enumerate(family.branches)])


def write_curve_csv(path, rows) -> None:
    write_csv(path, ["step", "voi", "pixel_error"],
              [(int(s), float(v), float(e)) for s, v, e in rows])
