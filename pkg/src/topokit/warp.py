"""Simple points, distance-ordered homotopy warping and critical masks."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numba
import numpy as np

from .grid import (Adjacency, InvalidArgument, as_mask, distance_transform, resolve_adjacency,
                   same_shape, threshold)

# 8-neighbourhood in row-major order; bit i of a pattern is neighbour i
OFFSETS_2D = [(dy, dx) for dy in (-1, 0, 1) for dx in (-1, 0, 1) if (dy, dx) != (0, 0)]
OFFSETS_3D = [(dz, dy, dx) for dz in (-1, 0, 1) for dy in (-1, 0, 1) for dx in (-1, 0, 1)
              if (dz, dy, dx) != (0, 0, 0)]


def _adjacent(a, b, conn: int) -> bool:
    d = [abs(x - y) for x, y in zip(a, b)]
    if max(d) != 1:
        return False
    return sum(d) == 1 if conn in (4, 6) else True


def _near(o, conn: int) -> bool:
    """Is offset o a conn-neighbour of the centre."""
    return _adjacent(o, (0,) * len(o), conn)


def _count_components(cells, conn: int, must_touch: int | None) -> int:
    """Components of `cells` (offsets) under conn; only those meeting the centre's must_touch-neighbourhood count."""
    cells = list(cells)
    seen = [False] * len(cells)
    count = 0
    for i in range(len(cells)):
        if seen[i]:
            continue
        seen[i] = True
        stack = [i]
        touches = False
        while stack:
            j = stack.pop()
            if must_touch is None or _near(cells[j], must_touch):
                touches = True
            for k in range(len(cells)):
                if not seen[k] and _adjacent(cells[j], cells[k], conn):
                    seen[k] = True
                    stack.append(k)
        count += touches
    return count


def _topological_numbers(fg_cells, bg_cells, adj: Adjacency) -> tuple[int, int]:
    if adj.ndim == 2:
        t_fg = _count_components(fg_cells, adj.foreground, 4 if adj.foreground == 4 else None)
        t_bg = _count_components(bg_cells, adj.background, 4 if adj.background == 4 else None)
        return t_fg, t_bg
    low = 6
    n18 = lambda cells: [c for c in cells if sum(map(abs, c)) <= 2]  # noqa: E731
    if adj.foreground == low:
        t_fg = _count_components(n18(fg_cells), 6, 6)
        t_bg = _count_components(bg_cells, 26, None)
    else:
        t_fg = _count_components(fg_cells, 26, None)
        t_bg = _count_components(n18(bg_cells), 6, 6)
    return t_fg, t_bg


def _simple_from_pattern(pattern: int, offsets, adj: Adjacency) -> bool:
    fg = [o for i, o in enumerate(offsets) if pattern >> i & 1]
    bg = [o for i, o in enumerate(offsets) if not pattern >> i & 1]
    t_fg, t_bg = _topological_numbers(fg, bg, adj)
    return t_fg == 1 and t_bg == 1


@lru_cache(maxsize=None)
def simple_table_2d(foreground: int = 4) -> np.ndarray:
    """256-entry lookup: is the centre simple given its 8-neighbourhood pattern."""
    adj = Adjacency.from_foreground(foreground)
    return np.array([_simple_from_pattern(p, OFFSETS_2D, adj) for p in range(256)], dtype=np.bool_)


@lru_cache(maxsize=None)
def _simple_3d_cached(pattern: int, foreground: int) -> bool:
    return _simple_from_pattern(pattern, OFFSETS_3D, Adjacency.from_foreground(foreground))


def simple_3d(pattern: int, foreground: int = 6) -> bool:
    """Simple-point test for a 26-bit neighbourhood pattern (memoised)."""
    return _simple_3d_cached(int(pattern), int(foreground))


def neighborhood_pattern(mask: np.ndarray, p) -> int:
    """Bit pattern of p's neighbourhood; out-of-bounds neighbours are background."""
    offsets = OFFSETS_2D if mask.ndim == 2 else OFFSETS_3D
    bits = 0
    for i, o in enumerate(offsets):
        q = tuple(a + b for a, b in zip(p, o))
        if all(0 <= c < s for c, s in zip(q, mask.shape)) and mask[q]:
            bits |= 1 << i
    return bits


def is_simple(mask, p, adjacency: Adjacency | int | None = None) -> bool:
    """True iff flipping pixel p leaves the topology of the mask unchanged."""
    mask = as_mask(mask)
    adj = resolve_adjacency(mask.ndim, adjacency)
    p = tuple(int(c) for c in (np.unravel_index(p, mask.shape) if np.isscalar(p) else p))
    if not all(0 <= c < s for c, s in zip(p, mask.shape)):
        raise InvalidArgument(f"p: {p} outside grid of shape {mask.shape}")
    pattern = neighborhood_pattern(mask, p)
    if mask.ndim == 2:
        return bool(simple_table_2d(adj.foreground)[pattern])
    return simple_3d(pattern, adj.foreground)


@numba.njit(cache=True)
def _pattern2d(cur, y, x):
    bits = 0
    i = 0
    for dy in range(-1, 2):
        for dx in range(-1, 2):
            if dy == 0 and dx == 0:
                continue
            if cur[y + dy, x + dx]:
                bits |= 1 << i
            i += 1
    return bits


@numba.njit(cache=True)
def _warp2d(cur, target, cand, lut, repeat):
    """Flip candidates (padded coordinates) in order when simple; returns flip count."""
    w = cur.shape[1] - 2
    done = np.zeros(cand.size, np.bool_)
    flips = 0
    while True:
        changed = False
        for i in range(cand.size):
            if done[i]:
                continue
            y = cand[i] // w + 1
            x = cand[i] % w + 1
            if lut[_pattern2d(cur, y, x)]:
                cur[y, x] = target[y, x]
                done[i] = True
                flips += 1
                changed = True
        if not repeat or not changed:
            break
    return flips


def warp_order(source: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Disagreeing pixels sorted by the source's distance transform, ties by index."""
    diff = np.flatnonzero((source != target).ravel())
    dist = distance_transform(source).ravel()[diff]
    return diff[np.lexsort((diff, dist))]


def homotopy_warp(source, target, repeat: bool = False,
                  adjacency: Adjacency | int | None = None) -> np.ndarray:
    """Move source toward target by flipping simple points only.

    Candidates are the initial disagreements, visited once in increasing
    distance-transform order of the source.  With `repeat` the remaining
    disagreements are rescanned until no flip happens.
    """
    source = as_mask(source, "source")
    target = as_mask(target, "target")
    same_shape(source, target, "source/target")
    adj = resolve_adjacency(source.ndim, adjacency)
    order = warp_order(source, target)
    if source.ndim == 2:
        cur = np.pad(source, 1).astype(np.bool_)
        tgt = np.pad(target, 1).astype(np.bool_)
        _warp2d(cur, tgt, order.astype(np.int64), simple_table_2d(adj.foreground), bool(repeat))
        return cur[1:-1, 1:-1].copy()
    return _warp_generic(source, target, order, adj, repeat)


def _warp_generic(source, target, order, adj, repeat):
    cur = source.copy()
    pending = [tuple(int(c) for c in np.unravel_index(i, cur.shape)) for i in order]
    while pending:
        left = []
        for p in pending:
            if is_simple(cur, p, adj):
                cur[p] = target[p]
            else:
                left.append(p)
        if not repeat or len(left) == len(pending):
            break
        pending = left
    return cur


@dataclass(frozen=True, eq=False)
class CriticalMask:
    m_g: np.ndarray
    m_f: np.ndarray

    @property
    def m(self) -> np.ndarray:
        return self.m_g | self.m_f


def critical_masks(pred, gt, repeat: bool = False,
                   adjacency: Adjacency | int | None = None) -> CriticalMask:
    """Pixels left in disagreement after warping in each direction."""
    pred = as_mask(pred, "pred")
    gt = as_mask(gt, "gt")
    same_shape(pred, gt)
    g_star = homotopy_warp(gt, pred, repeat, adjacency)
    f_star = homotopy_warp(pred, gt, repeat, adjacency)
    return CriticalMask(pred ^ g_star, gt ^ f_star)


def warping_error(pred, gt, adjacency: Adjacency | int | None = None) -> float:
    """Fraction of pixels where the ground truth, warped onto the prediction, still differs."""
    pred = as_mask(pred, "pred")
    gt = as_mask(gt, "gt")
    same_shape(pred, gt)
    g_star = homotopy_warp(gt, pred, adjacency=adjacency)
    return float(np.count_nonzero(g_star != pred)) / pred.size


def warp_loss_mask(pred_likelihood, gt, adjacency: Adjacency | int | None = None) -> np.ndarray:
    """Critical-pixel weight mask for a pixel loss, from the prediction binarised at 0.5."""
    return critical_masks(threshold(pred_likelihood, 0.5), gt, adjacency=adjacency).m


def warp_loss(pred_likelihood, gt, adjacency: Adjacency | int | None = None,
              eps: float = 1e-7) -> float:
    """Binary cross-entropy summed over critical pixels, divided by the pixel count."""
    f = np.clip(np.asarray(pred_likelihood, float), eps, 1 - eps)
    g = as_mask(gt, "gt")
    m = warp_loss_mask(f, g, adjacency)
    bce = -(g * np.log(f) + (~g) * np.log(1 - f))
    return float((bce * m).sum() / f.size)
