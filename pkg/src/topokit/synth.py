"""Synthetic scenes with known topology, used as the test corpus.

Each generator returns a Scene: named arrays plus a metadata dict holding
the analytically known Betti numbers and skeleton description.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .grid import InvalidArgument


@dataclass
class Scene:
    name: str
    arrays: dict[str, np.ndarray]
    meta: dict = field(default_factory=dict)


def _yx(shape):
    return np.mgrid[0:shape[0], 0:shape[1]].astype(np.float64)


def rings(n: int = 2, size: int = 24, radius: float = 7.0, width: float = 1.5) -> Scene:
    """n disjoint annuli side by side; b0 = b1 = n."""
    if n < 1:
        raise InvalidArgument(f"n: must be >= 1, got {n}")
    shape = (size, size * n)
    y, x = _yx(shape)
    mask = np.zeros(shape, bool)
    grid = np.zeros(shape)
    for i in range(n):
        cy, cx = (size - 1) / 2, size * i + (size - 1) / 2
        r = np.hypot(y - cy, x - cx)
        mask |= np.abs(r - radius) <= width
        grid = np.maximum(grid, np.exp(-((r - radius) / (2 * width)) ** 2))
    return Scene("rings", {"grid": grid, "mask": mask},
                 {"betti": [n, n], "skeleton": f"{n} closed loops of radius {radius}"})


def bars(size: int = 32, gap: int = 5, thickness: int = 3) -> Scene:
    """Warp scene: a bar broken by a gap (source) against an unbroken bar with a bulge (target).

    Warping the source onto the target fills the gap from both sides but
    must stop one column short.  The bulge hangs off the bar's left end, so
    it is a geometric error only and warping absorbs it.
    """
    if gap < 1 or thickness < 1 or size < 4 * thickness + gap:
        raise InvalidArgument("gap/thickness: scene does not fit in the grid")
    shape = (size, size)
    r0 = size // 2 - thickness // 2
    rows = slice(r0, r0 + thickness)
    c0, c1 = 2, size - 2
    g0 = (size - gap) // 2
    source = np.zeros(shape, bool)
    source[rows, c0:c1] = True
    source[rows, g0:g0 + gap] = False
    target = np.zeros(shape, bool)
    target[rows, c0:c1] = True
    y, x = _yx(shape)
    bcy, bcx, br = r0 + thickness, c0 + 5, 5.0
    target |= np.hypot(y - bcy, x - bcx) <= br
    return Scene("bars", {"source": source, "target": target},
                 {"betti_source": [2, 0], "betti_target": [1, 0],
                  "gap_rows": [r0, r0 + thickness], "gap_cols": [g0, g0 + gap],
                  "bulge": {"centre": [bcy, bcx], "radius": br},
                  "skeleton": "two collinear bars; warp leaves a one-column gap"})


def two_peak(height: int = 11, width: int = 23, saddle: float = 0.5) -> Scene:
    """Two maxima joined by a ridge along the middle row; one ridge branch."""
    y, x = _yx((height, width))
    cy = (height - 1) / 2
    t = x / (width - 1)
    ridge = saddle + (1 - saddle) * np.abs(np.cos(np.pi * t))
    grid = ridge * np.exp(-((y - cy) / (height / 4)) ** 2)
    # make the two peaks distinct so the pairing is unambiguous
    grid[int(cy), 0] += 1e-3
    return Scene("two_peak", {"grid": grid, "mask": grid >= 0.5 * saddle},
                 {"betti": [1, 0], "peaks": [[int(cy), 0], [int(cy), width - 1]],
                  "saddle_value": float(saddle), "branch_persistence": float(1 - saddle),
                  "skeleton": f"row {int(cy)}, columns 0..{width - 1}"})


def dumbbell(size: int = 40, radius: float = 8.0, neck: int = 3) -> Scene:
    """Two disks joined by a narrow neck; one blob, one separating boundary."""
    shape = (size, 2 * size)
    y, x = _yx(shape)
    cy = (size - 1) / 2
    a = np.hypot(y - cy, x - size / 2) <= radius
    b = np.hypot(y - cy, x - 3 * size / 2) <= radius
    neck_m = (np.abs(y - cy) <= neck / 2) & (x >= size / 2) & (x <= 3 * size / 2)
    mask = a | b | neck_m
    grid = ndimage.gaussian_filter(mask.astype(float), 1.0)
    return Scene("dumbbell", {"grid": grid, "mask": mask},
                 {"betti": [1, 0], "instances": 2,
                  "skeleton": f"a boundary across the neck near column {size}"})


def x_cross(size: int = 33, width: float = 1.0, peaks=(1.0, 0.98, 0.9, 0.88),
            centre: float = 0.6) -> Scene:
    """Horizontal and vertical ridges crossing at the centre; peaks at the four arm ends.

    Values rise linearly from `centre` to the arm peaks (left, right, top,
    bottom), so the crossing is a saddle region and the ridge skeleton is the
    middle row plus the middle column.
    """
    if size % 2 == 0 or size < 5:
        raise InvalidArgument(f"size: need an odd size >= 5, got {size}")
    c = size // 2
    t = np.abs(np.arange(size) - c) / c
    left, right, top, bottom = peaks
    row = centre + np.where(np.arange(size) < c, left - centre, right - centre) * t
    col = centre + np.where(np.arange(size) < c, top - centre, bottom - centre) * t
    y, x = _yx((size, size))
    horiz = row[None, :] * np.exp(-((y - c) / width) ** 2)
    vert = col[:, None] * np.exp(-((x - c) / width) ** 2)
    grid = np.maximum(horiz, vert)
    ridge = np.zeros((size, size), bool)
    ridge[c, :] = True
    ridge[:, c] = True
    return Scene("x_cross", {"grid": grid, "mask": grid >= 0.5, "ridge": ridge},
                 {"betti": [1, 0], "row": c, "column": c,
                  "skeleton": f"row {c} and column {c}, full length"})


def ridge_branches(n: int = 10, spacing: int = 8, height: int = 15,
                   persistences=None) -> Scene:
    """A row of n+1 peaks separated by n saddles; n ridge branches.

    Peak i has value 1 - 0.001 i, so the saddle between peaks i and i+1
    pairs with peak i+1 and its branch persistence is peak[i+1] - saddle[i].
    """
    if n < 1 or spacing < 2:
        raise InvalidArgument("n/spacing: need n >= 1 and spacing >= 2")
    if persistences is None:
        persistences = np.linspace(0.05, 0.6, n)[np.random.default_rng(n).permutation(n)]
    pers = np.asarray(persistences, float)
    if pers.shape != (n,) or np.any(pers <= 0) or np.any(pers >= 0.9):
        raise InvalidArgument("persistences: need n values in (0, 0.9)")
    width = spacing * n + 1
    peaks = 1.0 - 0.001 * np.arange(n + 1)
    saddles = peaks[1:] - pers
    xk = np.arange(0, width, spacing, dtype=float)
    xs = xk[:-1] + spacing / 2
    knots = np.empty(2 * n + 1)
    vals = np.empty(2 * n + 1)
    knots[0::2], vals[0::2] = xk, peaks
    knots[1::2], vals[1::2] = xs, saddles
    profile = np.interp(np.arange(width, dtype=float), knots, vals)
    y = np.arange(height, dtype=float)[:, None]
    cy = (height - 1) / 2
    grid = profile[None, :] * np.exp(-((y - cy) / (height / 4)) ** 2)
    return Scene("ridge_branches", {"grid": grid, "mask": grid >= 0.05},
                 {"betti": [1, 0], "branch_persistence": [float(p) for p in pers],
                  "row": int(cy), "skeleton": f"{n} segments along row {int(cy)}"})


def spur_ring(size: int = 16) -> Scene:
    """Likelihood of a one-pixel square ring with a weak link and two bridged spurs.

    Every spurious dot has single-pixel birth and death support, so assigning
    the matching targets at the critical pixels removes it in one step.
    """
    if size < 12:
        raise InvalidArgument(f"size: need >= 12, got {size}")
    lo, hi = 3, size - 3
    gt = np.zeros((size, size))
    gt[lo:hi, lo:hi] = 1.0
    gt[lo + 1:hi - 1, lo + 1:hi - 1] = 0.0
    f = gt.copy()
    mid = size // 2
    f[lo, mid] = 0.3                            # weak link in the ring
    f[mid, hi + 1], f[mid, hi] = 0.7, 0.4       # outer spur and its bridge
    f[lo + 3, lo + 2], f[lo + 3, lo + 1] = 0.8, 0.5   # inner spur and its bridge
    return Scene("spur_ring", {"grid": f, "mask": gt},
                 {"betti": [1, 1], "spurs": 2,
                  "skeleton": "square ring; one weak link, two one-pixel spurs"})


SCENES = {
    "rings": rings,
    "bars": bars,
    "two_peak": two_peak,
    "dumbbell": dumbbell,
    "x_cross": x_cross,
    "ridge_branches": ridge_branches,
    "spur_ring": spur_ring,
}


def make(name: str, **kw) -> Scene:
    try:
        fn = SCENES[name]
    except KeyError:
        raise InvalidArgument(f"scene: unknown {name!r}; choose from {', '.join(SCENES)}") from None
    return fn(**kw)
