"""Discrete gradient fields, persistence-guided cancellation and ridge skeletons.

The field lives on the same cubical complex as the persistence module.
Peaks of the likelihood are critical vertices, saddles are critical edges
and pits are critical squares.  Gradient paths run from a saddle edge
through vertex-edge pairs down to the peaks, so the union of those paths is
the ridge network of the map.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

from .grid import InvalidArgument, as_grid
from .persistence import CubicalComplex, _cstrides, build_complex, persistence_pairs


@dataclass(frozen=True, eq=False)
class VectorField:
    complex: CubicalComplex
    partner: np.ndarray            # paired cell per cell, -1 when critical
    cancelled: int = 0
    skipped: int = 0

    @property
    def critical_cells(self) -> np.ndarray:
        return np.flatnonzero(self.partner < 0)

    def v_pairs(self) -> list[tuple[int, int]]:
        """(higher-dimensional cell, facet) pairs."""
        dims = self.complex.dims
        cells = np.flatnonzero(self.partner >= 0)
        return [(int(c), int(self.partner[c])) for c in cells if dims[self.partner[c]] < dims[c]]

    def critical_count(self) -> list[int]:
        crit = self.critical_cells
        return [int(c) for c in np.bincount(self.complex.dims[crit], minlength=self.complex.ndim + 1)]


@numba.njit(cache=True)
def _edge_axis_stride(c, cshape, strides):
    for ax in range(cshape.size):
        if (c // strides[ax]) % cshape[ax] % 2 == 1:
            return strides[ax]
    return 0


@numba.njit(cache=True)
def _descend(partner, start, buf_v, buf_e):
    """Follow vertex-edge pairs from `start` to a critical vertex; returns path length."""
    u = start
    k = 0
    while True:
        buf_v[k] = u
        e = partner[u]
        if e < 0:
            return k
        buf_e[k] = e
        u = 2 * e - u
        k += 1


@numba.njit(cache=True)
def _edge_cofaces(c, cshape, strides, out):
    """Squares adjacent to edge c (2D only); returns count."""
    k = 0
    for ax in range(cshape.size):
        coord = (c // strides[ax]) % cshape[ax]
        if coord % 2 == 0:
            if coord > 0:
                out[k] = c - strides[ax]
                k += 1
            if coord < cshape[ax] - 1:
                out[k] = c + strides[ax]
                k += 1
    return k


@numba.njit(cache=True)
def _ascend(partner, start_edge, first_square, target, cshape, strides, buf_e, buf_q):
    """Trace back from an edge through `first_square`; returns length ending at target or -1."""
    cof = np.empty(2, np.int64)
    x = start_edge
    q = first_square
    k = 0
    while True:
        buf_e[k] = x
        buf_q[k] = q
        if q == target:
            return k + 1
        y = partner[q]
        if y < 0:
            return -1
        x = y
        n = _edge_cofaces(x, cshape, strides, cof)
        nxt = -1
        for i in range(n):
            if cof[i] != q:
                nxt = cof[i]
        if nxt < 0:
            return -1
        q = nxt
        k += 1


@numba.njit(cache=True)
def _cancel_all(partner, pb, pd, pdim, cshape, strides, n_cells):
    """Cancel the given pairs in order where the connecting path is unique."""
    buf_a = np.empty(n_cells + 1, np.int64)
    buf_b = np.empty(n_cells + 1, np.int64)
    buf_c = np.empty(n_cells + 1, np.int64)
    buf_d = np.empty(n_cells + 1, np.int64)
    cof = np.empty(2, np.int64)
    done = np.zeros(pb.size, np.bool_)
    for i in range(pb.size):
        b = pb[i]
        d = pd[i]
        if partner[b] >= 0 or partner[d] >= 0:
            continue
        if pdim[i] == 0:
            s = _edge_axis_stride(d, cshape, strides)
            u0 = d - s
            u1 = d + s
            k0 = _descend(partner, u0, buf_a, buf_b)
            hit0 = buf_a[k0] == b
            k1 = _descend(partner, u1, buf_c, buf_d)
            hit1 = buf_c[k1] == b
            if hit0 == hit1:
                continue
            if hit1:
                for j in range(k1 + 1):
                    buf_a[j] = buf_c[j]
                for j in range(k1):
                    buf_b[j] = buf_d[j]
                k0 = k1
            # vertices buf_a[0..k0], edges d, buf_b[0..k0-1]
            partner[d] = buf_a[0]
            partner[buf_a[0]] = d
            for j in range(k0):
                partner[buf_b[j]] = buf_a[j + 1]
                partner[buf_a[j + 1]] = buf_b[j]
            done[i] = True
        else:
            n = _edge_cofaces(b, cshape, strides, cof)
            hits = 0
            best = -1
            kbest = 0
            for j in range(n):
                if j == 0:
                    k = _ascend(partner, b, cof[j], d, cshape, strides, buf_a, buf_b)
                    if k > 0:
                        hits += 1
                        best = 0
                        kbest = k
                else:
                    k = _ascend(partner, b, cof[j], d, cshape, strides, buf_c, buf_d)
                    if k > 0:
                        hits += 1
                        best = 1
                        kbest = k
            if hits != 1:
                continue
            if best == 1:
                for j in range(kbest):
                    buf_a[j] = buf_c[j]
                    buf_b[j] = buf_d[j]
            for j in range(kbest):
                partner[buf_a[j]] = buf_b[j]
                partner[buf_b[j]] = buf_a[j]
            done[i] = True
    return done


def cancellation_order(cx: CubicalComplex, epsilon: float):
    """Persistence pairs below epsilon, by persistence then death-cell position."""
    pdims, pb, pd, _ = persistence_pairs(cx)
    keep = pdims < 2
    pdims, pb, pd = pdims[keep], pb[keep], pd[keep]
    pers = cx.values[pb] - cx.values[pd]
    sel = pers < epsilon
    pdims, pb, pd, pers = pdims[sel], pb[sel], pd[sel], pers[sel]
    idx = np.lexsort((cx.position[pd], pers))
    return pdims[idx], pb[idx], pd[idx]


def build_field(grid, epsilon: float, complex: CubicalComplex | None = None,
                on_cancel=None) -> VectorField:
    """Start with every cell critical, then cancel persistence pairs below epsilon.

    `on_cancel(partner, birth, death, done)` is called after each attempted
    cancellation when given; it is meant for invariant checks and runs the
    slow pure-numpy loop.
    """
    if not np.isfinite(epsilon) or epsilon < 0:
        raise InvalidArgument(f"epsilon: must be finite and >= 0, got {epsilon}")
    cx = complex if complex is not None else build_complex(grid)
    if cx.ndim != 2:
        raise InvalidArgument("grid: gradient fields are implemented for 2D grids only")
    partner = np.full(cx.n_cells, -1, np.int64)
    pdims, pb, pd = cancellation_order(cx, epsilon)
    cshape = np.asarray(cx.cshape, np.int64)
    strides = _cstrides(cx.cshape)
    if on_cancel is None:
        done = _cancel_all(partner, pb, pd, pdims, cshape, strides, cx.n_cells)
    else:
        done = np.zeros(pb.size, bool)
        for i in range(pb.size):
            done[i] = _cancel_all(partner, pb[i:i + 1], pd[i:i + 1], pdims[i:i + 1],
                                  cshape, strides, cx.n_cells)[0]
            on_cancel(partner, int(pb[i]), int(pd[i]), bool(done[i]))
    n_done = int(done.sum())
    return VectorField(cx, partner, n_done, int(pb.size) - n_done)


def check_field(vf: VectorField) -> None:
    """Raise AssertionError unless pairs are symmetric, face-coface, and acyclic."""
    cx = vf.complex
    partner = vf.partner
    paired = np.flatnonzero(partner >= 0)
    assert np.all(partner[partner[paired]] == paired), "pairing is not symmetric"
    for c in paired:
        p = int(partner[c])
        if cx.dims[p] > cx.dims[c]:
            assert c in cx.faces(p), f"cell {c} is not a facet of its partner {p}"
    # vertex-edge paths: each vertex has at most one successor
    for v in np.flatnonzero((cx.dims == 0) & (partner >= 0)):
        seen = set()
        u = int(v)
        while partner[u] >= 0:
            assert u not in seen, "cyclic vertex-edge path"
            seen.add(u)
            u = 2 * int(partner[u]) - u
    # edge-square paths: Kahn's algorithm on the edge digraph
    succ: dict[int, list[int]] = {}
    indeg: dict[int, int] = {}
    for e in np.flatnonzero(cx.dims == 1):
        e = int(e)
        for q in cx.cofaces(e):
            y = int(partner[q])
            if y >= 0 and q != partner[e] and y != e:
                succ.setdefault(e, []).append(y)
                indeg[y] = indeg.get(y, 0) + 1
    nodes = set(succ) | set(indeg)
    queue = [n for n in nodes if indeg.get(n, 0) == 0]
    seen_count = 0
    while queue:
        n = queue.pop()
        seen_count += 1
        for m in succ.get(n, []):
            indeg[m] -= 1
            if indeg[m] == 0:
                queue.append(m)
    assert seen_count == len(nodes), "cyclic edge-square path"


# ---------------------------------------------------------------------------
# skeletons

@dataclass(frozen=True, eq=False)
class Branch:
    saddle: int                     # critical edge ID
    persistence: float
    cells: np.ndarray               # gradient path: peak ... saddle ... peak
    pixels: np.ndarray              # pixels owned by this branch (flat indices)


@dataclass(frozen=True, eq=False)
class SkeletonFamily:
    shape: tuple[int, ...]
    branches: list[Branch] = field(default_factory=list)
    base_epsilon: float = 0.0

    def __post_init__(self):
        pers = np.full(int(np.prod(self.shape)), -np.inf)
        owner = np.full(pers.size, -1, np.int64)
        for i, b in enumerate(self.branches):
            pers[b.pixels] = b.persistence
            owner[b.pixels] = i
        object.__setattr__(self, "_pixel_persistence", pers)
        object.__setattr__(self, "_owner", owner)

    def __len__(self) -> int:
        return len(self.branches)

    @property
    def persistences(self) -> np.ndarray:
        return np.array([b.persistence for b in self.branches])

    @property
    def pixel_persistence(self) -> np.ndarray:
        return self._pixel_persistence.reshape(self.shape)

    @property
    def owner(self) -> np.ndarray:
        return self._owner.reshape(self.shape)

    def query(self, epsilon: float) -> np.ndarray:
        """Pixels of every branch with persistence >= epsilon."""
        return (self._pixel_persistence >= epsilon).reshape(self.shape)

    def mask_of(self, include) -> np.ndarray:
        """Union of the branches flagged in the boolean sequence `include`."""
        keep = np.zeros(len(self.branches) + 1, bool)
        keep[:-1] = np.asarray(include, bool)
        return keep[self._owner].reshape(self.shape)

    def branch_mask(self, i: int) -> np.ndarray:
        return (self._owner == i).reshape(self.shape)


def _exclusive(shape, raw: list[tuple[float, int, np.ndarray, np.ndarray]]) -> list[Branch]:
    """Sort by persistence (descending) and give each pixel to its first branch."""
    raw.sort(key=lambda t: (-t[0], t[1]))
    taken = np.zeros(int(np.prod(shape)), bool)
    out = []
    for pers, saddle, cells, pix in raw:
        pix = np.unique(pix)
        own = pix[~taken[pix]]
        taken[own] = True
        out.append(Branch(int(saddle), float(pers), cells, own))
    return out


def skeleton_1d(grid, epsilon: float) -> SkeletonFamily:
    """Ridge skeleton: gradient paths from surviving saddles down to their peaks.

    Branch persistence is that of the saddle's persistence pair.  Branches
    below epsilon (saddles that could not be cancelled) are dropped.
    """
    f = as_grid(grid)
    cx = build_complex(f)
    vf = build_field(f, epsilon, complex=cx)
    pdims, pb, pd, _ = persistence_pairs(cx)
    pers_of = np.zeros(cx.n_cells)
    sel = pdims < 2
    pers = cx.values[pb[sel]] - cx.values[pd[sel]]
    pers_of[pb[sel]] = pers
    pers_of[pd[sel]] = pers
    partner = vf.partner
    saddles = np.flatnonzero((cx.dims == 1) & (partner < 0))
    strides = _cstrides(cx.cshape)
    cshape = np.asarray(cx.cshape, np.int64)
    buf_v = np.empty(cx.n_cells + 1, np.int64)
    buf_e = np.empty(cx.n_cells + 1, np.int64)
    raw = []
    for s in saddles:
        p = pers_of[s]
        if p < epsilon:
            continue
        st = _edge_axis_stride(int(s), cshape, strides)
        halves = []
        for u in (s - st, s + st):
            k = _descend(partner, int(u), buf_v, buf_e)
            cells = np.empty(2 * k + 1, np.int64)
            cells[0::2] = buf_v[:k + 1]
            cells[1::2] = buf_e[:k]
            halves.append(cells)
        cells = np.concatenate([halves[0][::-1], [s], halves[1]])
        verts = cells[cx.dims[cells] == 0]
        raw.append((float(p), int(cx.position[s]), cells, cx.pixel[verts]))
    return SkeletonFamily(f.shape, _exclusive(f.shape, raw), float(epsilon))


def dmt_critical_mask(likelihood, epsilon: float = 0.2, sheets: bool = True) -> np.ndarray:
    """Pixels on the ridge skeleton and (optionally) on the basin boundaries.

    3D grids use the basin boundaries of each z-slab only.
    """
    from .watershed import sheets_2d_approx
    f = as_grid(likelihood, "likelihood")
    if f.ndim == 3:
        return np.stack([sheets_2d_approx(s, epsilon) for s in f])
    m = skeleton_1d(f, epsilon).query(epsilon)
    if sheets:
        m |= sheets_2d_approx(f, epsilon)
    return m


def dmt_loss(likelihood, gt, epsilon: float = 0.2, eps: float = 1e-7) -> float:
    """Cross-entropy restricted to the Morse-structure pixels, divided by the pixel count."""
    f = np.clip(as_grid(likelihood, "likelihood"), eps, 1 - eps)
    g = np.asarray(gt, bool)
    m = dmt_critical_mask(f, epsilon)
    bce = -(g * np.log(f) + (~g) * np.log(1 - f))
    return float((bce * m).sum() / f.size)
