"""Grids, masks, adjacency conventions, components, Betti numbers, distances.

Arrays follow numpy order: a 2D grid of width W and height H is an array of
shape (H, W), a 3D grid of depth D has shape (D, H, W).  Flattening in C order
gives the row-major, x-fastest linear index used for every pixel and cell ID.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage


class InvalidArgument(ValueError):
    """Raised when an operation's precondition is violated."""


_PAIRS = {2: {4: 8, 8: 4}, 3: {6: 26, 26: 6}}


@dataclass(frozen=True)
class Adjacency:
    foreground: int
    background: int

    def __post_init__(self):
        for ndim, pairs in _PAIRS.items():
            if pairs.get(self.foreground) == self.background:
                return
        raise InvalidArgument(
            f"adjacency: foreground {self.foreground} and background "
            f"{self.background} are not a complementary pair")

    @property
    def ndim(self) -> int:
        return 2 if self.foreground in (4, 8) else 3

    @classmethod
    def default(cls, ndim: int) -> "Adjacency":
        if ndim == 2:
            return cls(4, 8)
        if ndim == 3:
            return cls(6, 26)
        raise InvalidArgument(f"grids must be 2D or 3D, got ndim={ndim}")

    @classmethod
    def from_foreground(cls, fg: int) -> "Adjacency":
        for pairs in _PAIRS.values():
            if fg in pairs:
                return cls(fg, pairs[fg])
        raise InvalidArgument(f"adjacency: unsupported foreground connectivity {fg}")


def resolve_adjacency(ndim: int, adjacency: Adjacency | int | None) -> Adjacency:
    if adjacency is None:
        return Adjacency.default(ndim)
    if isinstance(adjacency, (int, np.integer)):
        adjacency = Adjacency.from_foreground(int(adjacency))
    if adjacency.ndim != ndim:
        raise InvalidArgument(
            f"adjacency: {adjacency.foreground}/{adjacency.background} does not fit a {ndim}D grid")
    return adjacency


def structure(ndim: int, connectivity: int) -> np.ndarray:
    """Structuring element for ndimage.label with the given neighbour count."""
    if connectivity in (4, 6):
        return ndimage.generate_binary_structure(ndim, 1)
    return ndimage.generate_binary_structure(ndim, ndim)


def as_grid(values, name: str = "grid") -> np.ndarray:
    """Validate a scalar field and return it as a float64 array."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim not in (2, 3):
        raise InvalidArgument(f"{name}: expected a 2D or 3D array, got shape {arr.shape}")
    if arr.size == 0:
        raise InvalidArgument(f"{name}: empty grid")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgument(f"{name}: values must be finite")
    return arr


def as_mask(bits, name: str = "mask") -> np.ndarray:
    arr = np.asarray(bits)
    if arr.ndim not in (2, 3):
        raise InvalidArgument(f"{name}: expected a 2D or 3D array, got shape {arr.shape}")
    return arr.astype(bool, copy=False)


def same_shape(a: np.ndarray, b: np.ndarray, names: str = "pred/gt") -> None:
    if a.shape != b.shape:
        raise InvalidArgument(f"{names}: shape mismatch {a.shape} vs {b.shape}")


def dims_of(arr: np.ndarray) -> tuple[int, ...]:
    """(width, height[, depth]) of an array stored in numpy order."""
    return tuple(int(s) for s in arr.shape[::-1])


def threshold(grid, alpha: float) -> np.ndarray:
    """Superlevel mask: True where grid >= alpha."""
    try:
        alpha = float(alpha)
    except (TypeError, ValueError):
        raise InvalidArgument(f"alpha: not a number ({alpha!r})") from None
    if not np.isfinite(alpha):
        raise InvalidArgument("alpha: must be finite")
    if not 0.0 < alpha < 1.0:
        raise InvalidArgument(f"alpha: must lie in (0, 1), got {alpha}")
    return as_grid(grid) >= alpha


def connected_components(mask, which: str = "foreground",
                         adjacency: Adjacency | int | None = None) -> tuple[np.ndarray, int]:
    """Label the foreground or background set; labels run 1..count, 0 elsewhere."""
    mask = as_mask(mask)
    adj = resolve_adjacency(mask.ndim, adjacency)
    if which == "foreground":
        sel, conn = mask, adj.foreground
    elif which == "background":
        sel, conn = ~mask, adj.background
    else:
        raise InvalidArgument(f"which: expected foreground or background, got {which!r}")
    labels, count = ndimage.label(sel, structure=structure(mask.ndim, conn))
    return labels, int(count)


def _any_window(mask: np.ndarray, axes: tuple[int, ...]) -> np.ndarray:
    """OR of pad(mask) over unit offsets along `axes`: lattice elements touched."""
    padded = np.pad(mask, 1)
    out = np.zeros(tuple(s + 1 if ax in axes else s for ax, s in enumerate(mask.shape)), bool)
    for offs in np.ndindex(*(2 if ax in axes else 1 for ax in range(mask.ndim))):
        sl = tuple(slice(o, o + n) if ax in axes else slice(1, 1 + n)
                   for ax, (o, n) in enumerate(zip(offs, out.shape)))
        out |= padded[sl]
    return out


def _all_window(mask: np.ndarray, axes: tuple[int, ...]) -> np.ndarray:
    """AND of mask over unit offsets along `axes` (blocks fully inside the set)."""
    shape = tuple(s - 1 if ax in axes else s for ax, s in enumerate(mask.shape))
    if min(shape) <= 0:
        return np.zeros((0,), bool)
    out = np.ones(shape, bool)
    for offs in np.ndindex(*(2 if ax in axes else 1 for ax in range(mask.ndim))):
        sl = tuple(slice(o, o + n) for o, n in zip(offs, shape))
        out &= mask[sl]
    return out


def euler_characteristic(mask, adjacency: Adjacency | int | None = None) -> int:
    """Euler characteristic of the cubical complex the adjacency convention induces.

    Low connectivity (4/6): pixels are vertices, adjacent pairs edges, full 2x2
    blocks squares (and 2x2x2 blocks cubes).  High connectivity (8/26): pixels
    are closed unit squares/cubes and their lattice faces are counted.
    """
    mask = as_mask(mask)
    adj = resolve_adjacency(mask.ndim, adjacency)
    nd = mask.ndim
    chi = 0
    if adj.foreground in (4, 6):
        for k in range(nd + 1):
            for axes in _combinations(nd, k):
                chi += (-1) ** k * int(_all_window(mask, axes).sum()) if axes else int(mask.sum())
    else:
        # a lattice element of dimension j spans j axes; it is touched by the
        # 2^(nd - j) voxels around it along the remaining axes
        for j in range(nd + 1):
            for span in _combinations(nd, j):
                free = tuple(ax for ax in range(nd) if ax not in span)
                chi += (-1) ** j * int(_any_window(mask, free).sum())
    return chi


def _combinations(n: int, k: int):
    from itertools import combinations
    return list(combinations(range(n), k))


def betti_numbers(mask, adjacency: Adjacency | int | None = None) -> tuple[int, ...]:
    """(b0, b1) in 2D, (b0, b1, b2) in 3D; cavities are background components off the border."""
    mask = as_mask(mask)
    adj = resolve_adjacency(mask.ndim, adjacency)
    _, b0 = connected_components(mask, "foreground", adj)
    chi = euler_characteristic(mask, adj)
    if mask.ndim == 2:
        return b0, b0 - chi
    b2 = enclosed_background(mask, adj)
    return b0, b0 + b2 - chi, b2


def enclosed_background(mask, adjacency: Adjacency | int | None = None) -> int:
    """Number of background components that do not touch the grid border."""
    mask = as_mask(mask)
    labels, count = connected_components(mask, "background", adjacency)
    if count == 0:
        return 0
    border = np.zeros(mask.shape, bool)
    for ax in range(mask.ndim):
        idx = [slice(None)] * mask.ndim
        idx[ax] = 0
        border[tuple(idx)] = True
        idx[ax] = -1
        border[tuple(idx)] = True
    touching = np.unique(labels[border & (labels > 0)])
    return count - len(touching)


def distance_transform(mask) -> np.ndarray:
    """Exact Euclidean distance to the opposite set, per pixel.

    Foreground pixels carry the distance to the nearest background pixel and
    background pixels the distance to the nearest foreground pixel.  When the
    opposite set is empty the affected side is +inf.
    """
    mask = as_mask(mask)
    out = np.full(mask.shape, np.inf)
    if mask.any() and not mask.all():
        out[mask] = ndimage.distance_transform_edt(mask)[mask]
        out[~mask] = ndimage.distance_transform_edt(~mask)[~mask]
    return out
