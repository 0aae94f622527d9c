"""Basin sweeps: persistence-filtered watershed and basin-boundary skeletons.

Basins grow from minima in ascending value order over the 4-connected pixel
graph.  A merge between two basins has persistence equal to the current
level minus the younger basin's minimum.
"""
from __future__ import annotations

import numba
import numpy as np
from scipy import ndimage

from .grid import InvalidArgument, as_grid, as_mask, distance_transform, structure
from .morse import Branch, SkeletonFamily
from .persistence import _find


def _ascending_order(f: np.ndarray) -> np.ndarray:
    flat = f.ravel()
    return np.lexsort((np.arange(flat.size), flat)).astype(np.int64)


@numba.njit(cache=True)
def _neighbors4(p, h, w, out):
    y = p // w
    x = p % w
    k = 0
    if y > 0:
        out[k] = p - w
        k += 1
    if x > 0:
        out[k] = p - 1
        k += 1
    if x < w - 1:
        out[k] = p + 1
        k += 1
    if y < h - 1:
        out[k] = p + w
        k += 1
    return k


@numba.njit(cache=True)
def _watershed_sweep(flat, order, h, w, theta):
    """Sweep with merges blocked at persistence >= theta.

    Returns (edge_u, edge_v) of blocked (watershed) edges and the tree-edge
    events (u, v, persistence) in sweep order.
    """
    n = flat.size
    parent = np.arange(n)
    pos = np.full(n, -1, np.int64)
    nb = np.empty(4, np.int64)
    wu = np.empty(2 * n, np.int64)
    wv = np.empty(2 * n, np.int64)
    eu = np.empty(n, np.int64)
    ev = np.empty(n, np.int64)
    ep = np.empty(n)
    nw = 0
    ne = 0
    for i in range(n):
        v = order[i]
        pos[v] = i
        t = flat[v]
        k = _neighbors4(v, h, w, nb)
        for j in range(k):
            u = nb[j]
            if pos[u] < 0:
                continue
            a = _find(parent, u)
            b = _find(parent, v)
            if a == b:
                continue
            # roots are the minima of their basins; the later one is younger
            if pos[a] < pos[b]:
                a, b = b, a
            pers = t - flat[a]
            if pers >= theta:
                wu[nw] = u
                wv[nw] = v
                nw += 1
                continue
            parent[a] = b
            eu[ne] = u
            ev[ne] = v
            ep[ne] = pers
            ne += 1
    return wu[:nw], wv[:nw], eu[:ne], ev[:ne], ep[:ne]


def _check_2d(f: np.ndarray, name: str = "grid") -> None:
    if f.ndim != 2:
        raise InvalidArgument(f"{name}: a 2D grid is required, got shape {f.shape}")


def ph_watershed(grid, theta: float) -> np.ndarray:
    """Membrane pixels: both endpoints of every edge whose merge was blocked."""
    f = as_grid(grid)
    _check_2d(f)
    if not np.isfinite(theta) or theta <= 0:
        raise InvalidArgument(f"theta: must be finite and > 0, got {theta}")
    wu, wv, *_ = _watershed_sweep(f.ravel(), _ascending_order(f), f.shape[0], f.shape[1],
                                  float(theta))
    out = np.zeros(f.size, bool)
    out[wu] = True
    out[wv] = True
    return out.reshape(f.shape)


def watershed_regions(grid, theta: float) -> tuple[np.ndarray, int]:
    """4-connected regions left after removing the membrane."""
    memb = ph_watershed(grid, theta)
    labels, count = ndimage.label(~memb, structure=structure(2, 4))
    return labels, int(count)


def basin_labels(grid, theta: float) -> np.ndarray:
    """Basin of every pixel when merges with persistence >= theta are blocked."""
    f = as_grid(grid)
    _check_2d(f)
    _, _, eu, ev, _ = _watershed_sweep(f.ravel(), _ascending_order(f), f.shape[0], f.shape[1],
                                       float(theta))
    return _union_labels(f.size, eu, ev).reshape(f.shape)


def _union_labels(n, eu, ev):
    parent = np.arange(n)
    _union_pairs(parent, eu, ev)
    _, labels = np.unique(_roots(parent), return_inverse=True)
    return labels


@numba.njit(cache=True)
def _union_pairs(parent, eu, ev):
    for i in range(eu.size):
        a = _find(parent, eu[i])
        b = _find(parent, ev[i])
        if a != b:
            parent[a] = b


@numba.njit(cache=True)
def _roots(parent):
    out = np.empty(parent.size, np.int64)
    for i in range(parent.size):
        out[i] = _find(parent, i)
    return out


@numba.njit(cache=True)
def _edge_persistence(eu, ev, ep, h, w):
    """Persistence at which each grid edge stops separating two basins.

    Events are merged in increasing persistence; when two pixel sets join,
    the smaller one is scanned and every edge crossing into the larger one
    gets the event's persistence.  Returns horizontal (h, w-1) and vertical
    (h-1, w) arrays.
    """
    n = h * w
    label = np.arange(n)
    members_next = np.full(n, -1, np.int64)
    head = np.arange(n)
    tail = np.arange(n)
    size = np.ones(n, np.int64)
    eh = np.full((h, w - 1), np.inf)
    evv = np.full((h - 1, w), np.inf)
    nb = np.empty(4, np.int64)
    order = np.argsort(ep, kind="mergesort")
    for oi in range(order.size):
        i = order[oi]
        a = label[eu[i]]
        b = label[ev[i]]
        if a == b:
            continue
        if size[a] > size[b]:
            a, b = b, a
        p = ep[i]
        m = head[a]
        while m >= 0:
            k = _neighbors4(m, h, w, nb)
            for j in range(k):
                q = nb[j]
                if label[q] == b:
                    lo = min(m, q)
                    hi = max(m, q)
                    if hi - lo == 1:
                        eh[lo // w, lo % w] = p
                    else:
                        evv[lo // w, lo % w] = p
            m = members_next[m]
        m = head[a]
        while m >= 0:
            label[m] = b
            m = members_next[m]
        members_next[tail[b]] = head[a]
        tail[b] = tail[a]
        size[b] += size[a]
    return eh, evv


def edge_persistence(grid) -> tuple[np.ndarray, np.ndarray]:
    """Per-edge separation persistence (horizontal, vertical) of the full basin sweep."""
    f = as_grid(grid)
    _check_2d(f)
    _, _, eu, ev, ep = _watershed_sweep(f.ravel(), _ascending_order(f), f.shape[0], f.shape[1],
                                        np.inf)
    return _edge_persistence(eu, ev, ep, f.shape[0], f.shape[1])


def _upper_endpoint_persistence(f: np.ndarray, eh: np.ndarray, ev: np.ndarray) -> np.ndarray:
    """Per pixel, max persistence over the edges it is the upper endpoint of.

    The upper endpoint has the larger value, ties going to the larger index.
    """
    out = np.full(f.shape, -np.inf)
    right_up = f[:, 1:] >= f[:, :-1]
    out[:, 1:] = np.maximum(out[:, 1:], np.where(right_up, eh, -np.inf))
    out[:, :-1] = np.maximum(out[:, :-1], np.where(~right_up, eh, -np.inf))
    bot_up = f[1:, :] >= f[:-1, :]
    out[1:, :] = np.maximum(out[1:, :], np.where(bot_up, ev, -np.inf))
    out[:-1, :] = np.maximum(out[:-1, :], np.where(~bot_up, ev, -np.inf))
    return out


def sheets_2d_approx(grid, epsilon: float) -> np.ndarray:
    """One-pixel basin boundaries between basins whose minima have persistence >= epsilon."""
    f = as_grid(grid)
    _check_2d(f)
    if not np.isfinite(epsilon) or epsilon < 0:
        raise InvalidArgument(f"epsilon: must be finite and >= 0, got {epsilon}")
    eh, ev = edge_persistence(f)
    pix = _upper_endpoint_persistence(f, eh, ev)
    # zero-persistence merges are plateau artefacts, not basin boundaries
    return (pix >= epsilon) & (pix > 0)


def signed_distance(mask) -> np.ndarray:
    """Negative inside the foreground, positive outside."""
    m = as_mask(mask)
    d = distance_transform(m)
    return np.where(m, -d, d)


def boundary_skeleton_from_mask(mask, epsilon: float) -> SkeletonFamily:
    """Candidate instance-separating boundaries of a blob mask, with persistences.

    Basins of the signed distance grow from blob centres; each branch is an
    8-connected run of boundary pixels sharing one separation persistence.
    """
    m = as_mask(mask)
    _check_2d(m, "mask")
    if not np.isfinite(epsilon) or epsilon < 0:
        raise InvalidArgument(f"epsilon: must be finite and >= 0, got {epsilon}")
    if m.all() or not m.any():
        return SkeletonFamily(m.shape, [], float(epsilon))
    f = signed_distance(m)
    eh, ev = edge_persistence(f)
    pix = _upper_endpoint_persistence(f, eh, ev)
    return family_from_pixel_persistence(pix, epsilon)


def family_from_pixel_persistence(pix: np.ndarray, epsilon: float) -> SkeletonFamily:
    """Group pixels with equal positive persistence >= epsilon into 8-connected branches."""
    raw = []
    cand = (pix >= epsilon) & (pix > 0)
    for val in np.unique(pix[cand]):
        lab, k = ndimage.label(cand & (pix == val), structure=structure(2, 8))
        for j in range(1, k + 1):
            px = np.flatnonzero((lab == j).ravel())
            raw.append((float(val), int(px[0]), px))
    raw.sort(key=lambda t: (-t[0], t[1]))
    branches = [Branch(-1, p, px, px) for p, _, px in raw]
    return SkeletonFamily(pix.shape, branches, float(epsilon))
