"""Superlevel persistence of cubical complexes built on pixel grids.

Cells live on the doubled grid: a grid of shape (H, W) gives a complex of
shape (2H-1, 2W-1) whose entry at (i, j) is the cell with vertex (i/2, j/2)
when both coordinates are even, an edge when one is odd and a square when
both are odd.  A cell's dimension is its number of odd coordinates and its ID
is the C-order linear index into the doubled grid.

A cell enters the superlevel filtration when its last vertex does, so its
value is the minimum over its vertices.  Filtration order is value
descending, then dimension ascending, then cell ID ascending.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

from .grid import Adjacency, InvalidArgument, as_grid, resolve_adjacency

FRAME_VALUE = 1.0


@dataclass(frozen=True, eq=False)
class CubicalComplex:
    vertex_values: np.ndarray      # grid actually filtered (padded when framed)
    relative_frame: bool
    values: np.ndarray             # per cell, flat over the doubled grid
    dims: np.ndarray               # per cell dimension
    order: np.ndarray              # cell IDs in filtration order
    position: np.ndarray           # inverse of order
    rep_vertex: np.ndarray         # vertex (flat index into vertex_values) realising each cell's value
    pixel: np.ndarray              # per cell pixel index into the input grid, -1 on the frame
    grid_shape: tuple[int, ...]
    cshape: tuple[int, ...] = field(default=())

    @property
    def ndim(self) -> int:
        return len(self.cshape)

    @property
    def n_cells(self) -> int:
        return self.values.size

    def cell_counts(self) -> list[int]:
        return [int(c) for c in np.bincount(self.dims, minlength=self.ndim + 1)]

    def cell_coords(self, cell: int) -> tuple[int, ...]:
        return tuple(int(c) for c in np.unravel_index(cell, self.cshape))

    def faces(self, cell: int) -> list[int]:
        coords = np.unravel_index(cell, self.cshape)
        strides = _cstrides(self.cshape)
        out = []
        for ax, c in enumerate(coords):
            if c % 2:
                out.append(cell - strides[ax])
                out.append(cell + strides[ax])
        return out

    def cofaces(self, cell: int) -> list[int]:
        coords = np.unravel_index(cell, self.cshape)
        strides = _cstrides(self.cshape)
        out = []
        for ax, c in enumerate(coords):
            if c % 2 == 0:
                if c > 0:
                    out.append(cell - strides[ax])
                if c < self.cshape[ax] - 1:
                    out.append(cell + strides[ax])
        return out


def _cstrides(shape) -> np.ndarray:
    strides = np.ones(len(shape), np.int64)
    for ax in range(len(shape) - 2, -1, -1):
        strides[ax] = strides[ax + 1] * shape[ax + 1]
    return strides


def _double(arr: np.ndarray, reduce) -> np.ndarray:
    """Spread a vertex array onto the doubled grid, reducing over each cell's vertices."""
    out = arr
    for ax in range(arr.ndim):
        n = out.shape[ax]
        shape = list(out.shape)
        shape[ax] = 2 * n - 1
        new = np.empty(shape, out.dtype)
        sl_even = [slice(None)] * arr.ndim
        sl_even[ax] = slice(0, None, 2)
        new[tuple(sl_even)] = out
        if n > 1:
            lo = [slice(None)] * arr.ndim
            hi = [slice(None)] * arr.ndim
            lo[ax] = slice(0, -1)
            hi[ax] = slice(1, None)
            sl_odd = [slice(None)] * arr.ndim
            sl_odd[ax] = slice(1, None, 2)
            new[tuple(sl_odd)] = reduce(out[tuple(lo)], out[tuple(hi)])
        out = new
    return out


def build_complex(grid, relative_frame: bool = False) -> CubicalComplex:
    """Cubical complex of a 2D/3D grid; with `relative_frame` a border of 1.0 is added."""
    grid = as_grid(grid)
    if relative_frame:
        vals = np.pad(grid, 1, constant_values=FRAME_VALUE)
        inner = np.pad(np.arange(grid.size).reshape(grid.shape), 1, constant_values=-1)
    else:
        vals = grid
        inner = np.arange(grid.size).reshape(grid.shape)
    nv = vals.size
    # vertex lateness: the vertex entering last realises a cell's value; among
    # equal values prefer interior vertices so cells map back onto the input grid
    is_frame = (inner < 0).ravel()
    vrank = np.empty(nv, np.int64)
    vrank[np.lexsort((np.arange(nv), ~is_frame, -vals.ravel()))] = np.arange(nv)
    rank_d = _double(vrank.reshape(vals.shape), np.maximum)
    vorder = np.argsort(vrank)
    rep = vorder[rank_d.ravel()]
    values = vals.ravel()[rep]
    par = [np.arange(2 * n - 1) % 2 for n in vals.shape]
    dims = np.zeros(rank_d.shape, np.int8)
    for ax, p in enumerate(par):
        shape = [1] * vals.ndim
        shape[ax] = -1
        dims += p.reshape(shape).astype(np.int8)
    dims = dims.ravel()
    n = values.size
    order = np.lexsort((np.arange(n), dims, -values))
    position = np.empty(n, np.int64)
    position[order] = np.arange(n)
    pixel = inner.ravel()[rep]
    return CubicalComplex(vals, bool(relative_frame), values, dims, order, position,
                          rep, pixel, grid.shape, tuple(rank_d.shape))


# ---------------------------------------------------------------------------
# diagrams

@dataclass(frozen=True, eq=False)
class PersistenceDiagram:
    """Dots as parallel arrays.  Pixel fields index the input grid (-1: frame)."""
    dim: np.ndarray
    birth: np.ndarray
    death: np.ndarray
    birth_cell: np.ndarray
    death_cell: np.ndarray
    birth_pixel: np.ndarray
    death_pixel: np.ndarray
    essential: np.ndarray
    source: str = ""
    ndim: int = 0                  # dimension of the grid the diagram came from

    def __len__(self) -> int:
        return int(self.dim.size)

    @property
    def persistence(self) -> np.ndarray:
        return self.birth - self.death

    def select(self, dim: int) -> "PersistenceDiagram":
        keep = self.dim == dim
        return self._subset(keep)

    def _subset(self, keep) -> "PersistenceDiagram":
        return PersistenceDiagram(*(getattr(self, f)[keep] for f in _FIELDS),
                                  source=self.source, ndim=self.ndim)

    def max_dim(self) -> int:
        return int(self.dim.max()) if len(self) else 0

    def betti_at(self, alpha: float, dim: int) -> int:
        """Dots alive in the superlevel set at alpha; essential dots never die."""
        sel = self.dim == dim
        alive = (self.birth >= alpha) & ((self.death < alpha) | self.essential)
        return int(np.count_nonzero(sel & alive))

    def with_unit_essential(self) -> "PersistenceDiagram":
        """Copy where essential dots die at 1.0, the convention used for unit-range maps."""
        death = np.where(self.essential, 1.0, self.death)
        return PersistenceDiagram(self.dim, self.birth, death, self.birth_cell, self.death_cell,
                                  self.birth_pixel, self.death_pixel, self.essential, self.source,
                                  self.ndim)

    def shifted(self, c: float) -> "PersistenceDiagram":
        return PersistenceDiagram(self.dim, self.birth + c, self.death + c, self.birth_cell,
                                  self.death_cell, self.birth_pixel, self.death_pixel,
                                  self.essential, self.source, self.ndim)

    def rows(self) -> list[tuple]:
        return [(int(d), float(b), float(x), int(cb), int(cd), bool(e))
                for d, b, x, cb, cd, e in zip(self.dim, self.birth, self.death,
                                              self.birth_cell, self.death_cell, self.essential)]

    def multiset(self, dim: int | None = None, ndigits: int = 12) -> list[tuple]:
        """Sorted (dim, birth, death) triples, essential death reported as inf."""
        out = []
        for d, b, x, e in zip(self.dim, self.birth, self.death, self.essential):
            if dim is not None and d != dim:
                continue
            out.append((int(d), round(float(b), ndigits), np.inf if e else round(float(x), ndigits)))
        return sorted(out)


_FIELDS = ("dim", "birth", "death", "birth_cell", "death_cell", "birth_pixel",
           "death_pixel", "essential")


def _make_diagram(cx: CubicalComplex, dims, bcells, dcells, ess, source="") -> PersistenceDiagram:
    bcells = np.asarray(bcells, np.int64)
    dcells = np.asarray(dcells, np.int64)
    ess = np.asarray(ess, bool)
    birth = cx.values[bcells]
    death = cx.values[dcells]
    return PersistenceDiagram(np.asarray(dims, np.int64), birth, death, bcells, dcells,
                              cx.pixel[bcells], cx.pixel[dcells], ess, source, cx.ndim)


@numba.njit(cache=True)
def _find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


@numba.njit(cache=True)
def _h0_pairs(order, dims, cshape, strides):
    """Vertex-edge pairs by union-find with the elder rule.

    Returns (births, deaths, negative) where negative flags edges that merge
    components; the remaining edges create cycles.
    """
    n = order.size
    nd = cshape.size
    parent = np.arange(n)
    pos = np.empty(n, np.int64)
    for i in range(n):
        pos[order[i]] = i
    births = np.empty(n, np.int64)
    deaths = np.empty(n, np.int64)
    negative = np.zeros(n, np.bool_)
    k = 0
    for i in range(n):
        c = order[i]
        if dims[c] != 1:
            continue
        rem = c
        s = 0
        for ax in range(nd):
            coord = (rem // strides[ax]) % cshape[ax]
            if coord % 2 == 1:
                s = strides[ax]
        a = _find(parent, c - s)
        b = _find(parent, c + s)
        if a == b:
            continue
        # roots are always the birth vertex of their component
        if pos[a] < pos[b]:
            a, b = b, a
        parent[a] = b
        births[k] = a
        deaths[k] = c
        negative[c] = True
        k += 1
    return births[:k], deaths[:k], negative


@numba.njit(cache=True)
def _top_pairs(order, dims, cshape, strides):
    """(d-1)-cell / d-cell pairs by union-find on the dual graph, swept in reverse."""
    n = order.size
    nd = cshape.size
    top = nd
    outer = n
    parent = np.arange(n + 1)
    born = np.full(n + 1, -1, np.int64)
    births = np.empty(n, np.int64)
    deaths = np.empty(n, np.int64)
    k = 0
    for j in range(n):
        c = order[n - 1 - j]
        d = dims[c]
        if d == top:
            born[c] = j
            continue
        if d != top - 1:
            continue
        a = -1
        b = -1
        for ax in range(nd):
            coord = (c // strides[ax]) % cshape[ax]
            if coord % 2 == 0:
                a = c - strides[ax] if coord > 0 else outer
                b = c + strides[ax] if coord < cshape[ax] - 1 else outer
        ra = _find(parent, a)
        rb = _find(parent, b)
        if ra == rb:
            continue
        if born[ra] < born[rb]:
            ra, rb = rb, ra
        parent[ra] = rb
        births[k] = c
        deaths[k] = ra
        k += 1
    return births[:k], deaths[:k]


def persistence_pairs(cx: CubicalComplex, method: str = "union_find"):
    """All persistence pairs, zero persistence included.

    Returns (dims, birth_cells, death_cells, essential_cells).
    """
    if method == "reduction":
        return _reduction_pairs(cx)
    if method != "union_find":
        raise InvalidArgument(f"method: expected union_find or reduction, got {method!r}")
    cshape = np.asarray(cx.cshape, np.int64)
    strides = _cstrides(cx.cshape)
    b0, d0, negative = _h0_pairs(cx.order, cx.dims, cshape, strides)
    dims = [np.zeros(b0.size, np.int64)]
    bs, ds = [b0], [d0]
    if cx.ndim >= 1:
        bt, dt = _top_pairs(cx.order, cx.dims, cshape, strides)
        if cx.ndim == 1:
            pass
        elif cx.ndim == 2:
            dims.append(np.ones(bt.size, np.int64))
            bs.append(bt)
            ds.append(dt)
        else:
            dims.append(np.full(bt.size, cx.ndim - 1, np.int64))
            bs.append(bt)
            ds.append(dt)
            mb, md, mdim = _middle_pairs(cx, negative, bt)
            dims.append(mdim)
            bs.append(mb)
            ds.append(md)
    paired = np.zeros(cx.n_cells, bool)
    for arr in bs + ds:
        paired[arr] = True
    ess = np.flatnonzero(~paired)
    return np.concatenate(dims), np.concatenate(bs), np.concatenate(ds), ess


def _middle_pairs(cx: CubicalComplex, negative_edges, positive_faces):
    """Edge-face pairs of a 3D complex by column reduction with clearing."""
    pos = cx.position
    cleared = np.zeros(cx.n_cells, bool)
    cleared[positive_faces] = True
    pivot_of: dict[int, set] = {}
    births, deaths = [], []
    for c in cx.order:
        if cx.dims[c] != 2 or cleared[c]:
            continue
        col = {int(pos[f]) for f in cx.faces(int(c))}
        while col:
            low = max(col)
            other = pivot_of.get(low)
            if other is None:
                pivot_of[low] = col
                births.append(int(cx.order[low]))
                deaths.append(int(c))
                break
            col ^= other
    n = len(births)
    return np.asarray(births, np.int64), np.asarray(deaths, np.int64), np.ones(n, np.int64)


def _reduction_pairs(cx: CubicalComplex):
    """Standard column reduction over the full boundary matrix, top dimension first."""
    pos = cx.position
    n = cx.n_cells
    cleared = np.zeros(n, bool)
    bdims, bcells, dcells = [], [], []
    for d in range(cx.ndim, 0, -1):
        pivot_of: dict[int, set] = {}
        for c in cx.order:
            if cx.dims[c] != d or cleared[c]:
                continue
            col = {int(pos[f]) for f in cx.faces(int(c))}
            while col:
                low = max(col)
                other = pivot_of.get(low)
                if other is None:
                    pivot_of[low] = col
                    face = int(cx.order[low])
                    cleared[face] = True
                    bdims.append(d - 1)
                    bcells.append(face)
                    dcells.append(int(c))
                    break
                col ^= other
    paired = np.zeros(n, bool)
    paired[bcells] = True
    paired[dcells] = True
    ess = np.flatnonzero(~paired)
    return (np.asarray(bdims, np.int64), np.asarray(bcells, np.int64),
            np.asarray(dcells, np.int64), ess)


def _essential_death_cell(cx: CubicalComplex) -> int:
    """Last vertex of minimum value in filtration order."""
    vcells = cx.order[cx.dims[cx.order] == 0]
    return int(vcells[-1])


def compute_diagram(cx: CubicalComplex, method: str = "union_find",
                    unit_essential: bool = False) -> PersistenceDiagram:
    """Diagram for dimensions 0..d-1 with zero-persistence dots dropped.

    The essential component dies at the minimum grid value; pass
    `unit_essential` to report it as dying at 1.0 instead.
    """
    pdims, pb, pd, ess = persistence_pairs(cx, method)
    keep = cx.values[pb] != cx.values[pd]
    pdims, pb, pd = pdims[keep], pb[keep], pd[keep]
    ess = ess[cx.dims[ess] < cx.ndim]
    ess_dims = cx.dims[ess].astype(np.int64)
    ess_death = np.full(ess.size, _essential_death_cell(cx), np.int64)
    dims = np.concatenate([pdims, ess_dims])
    bc = np.concatenate([pb, ess])
    dc = np.concatenate([pd, ess_death])
    flags = np.concatenate([np.zeros(pb.size, bool), np.ones(ess.size, bool)])
    idx = np.lexsort((cx.position[bc], dims))
    dgm = _make_diagram(cx, dims[idx], bc[idx], dc[idx], flags[idx], source="complex")
    return dgm.with_unit_essential() if unit_essential else dgm


def diagram(grid, relative_frame: bool = False, **kw) -> PersistenceDiagram:
    """Shortcut: build the complex and compute its diagram."""
    return compute_diagram(build_complex(grid, relative_frame), **kw)


# ---------------------------------------------------------------------------
# pixel sweep

def neighbor_offsets(ndim: int, connectivity: int) -> np.ndarray:
    offs = []
    for d in np.ndindex(*([3] * ndim)):
        o = np.array(d) - 1
        nz = np.count_nonzero(o)
        if nz == 0:
            continue
        if connectivity in (4, 6) and nz > 1:
            continue
        offs.append(o)
    return np.array(offs, np.int64)


def padded_offsets(shape, connectivity: int) -> np.ndarray:
    """Flat index offsets for neighbours inside an array padded by one on each side."""
    pshape = tuple(s + 2 for s in shape)
    strides = _cstrides(pshape)
    return neighbor_offsets(len(shape), connectivity) @ strides


@numba.njit(cache=True)
def _sweep(order, present_init, offsets, pad_index):
    """Descending pixel sweep; returns (birth_pixel, death_pixel) of finite merges."""
    n = order.size
    present = present_init.copy()
    parent = np.arange(present.size)
    pos = np.full(present.size, -1, np.int64)
    births = np.empty(n, np.int64)
    deaths = np.empty(n, np.int64)
    k = 0
    for i in range(n):
        p = pad_index[order[i]]
        present[p] = True
        pos[p] = i
        for o in offsets:
            q = p + o
            if not present[q] or pos[q] < 0:
                continue
            a = _find(parent, p)
            b = _find(parent, q)
            if a == b:
                continue
            if pos[a] < pos[b]:
                a, b = b, a
            parent[a] = b
            births[k] = a
            deaths[k] = p
            k += 1
    return births[:k], deaths[:k]


def zero_dim_sweep(grid, adjacency: Adjacency | int | None = None,
                   keep_zero: bool = False) -> PersistenceDiagram:
    """Union-find sweep over pixels in descending value order (dimension 0 only).

    Pixel fields hold linear pixel indices; cell fields hold the matching
    vertex cell IDs of the doubled grid.
    """
    grid = as_grid(grid)
    adj = resolve_adjacency(grid.ndim, adjacency)
    n = grid.size
    flat = grid.ravel()
    order = np.lexsort((np.arange(n), -flat))
    pshape = tuple(s + 2 for s in grid.shape)
    pad_index = np.arange(np.prod(pshape)).reshape(pshape)[tuple(slice(1, -1) for _ in grid.shape)].ravel()
    present = np.zeros(int(np.prod(pshape)), np.bool_)
    offsets = padded_offsets(grid.shape, adj.foreground)
    bpad, dpad = _sweep(order, present, offsets, pad_index)
    unpad = np.full(present.size, -1, np.int64)
    unpad[pad_index] = np.arange(n)
    bpix, dpix = unpad[bpad], unpad[dpad]
    if not keep_zero:
        keep = flat[bpix] != flat[dpix]
        bpix, dpix = bpix[keep], dpix[keep]
    top = int(order[0])
    last = int(order[-1])
    bpix = np.append(bpix, top)
    dpix = np.append(dpix, last)
    ess = np.zeros(bpix.size, bool)
    ess[-1] = True
    vcell = vertex_cell_ids(grid.shape)
    return PersistenceDiagram(np.zeros(bpix.size, np.int64), flat[bpix], flat[dpix],
                              vcell[bpix], vcell[dpix], bpix, dpix, ess, "sweep", grid.ndim)


def vertex_cell_ids(shape) -> np.ndarray:
    """Doubled-grid cell ID of every pixel, flat in pixel order."""
    cshape = tuple(2 * s - 1 for s in shape)
    idx = np.indices(shape).reshape(len(shape), -1) * 2
    return np.ravel_multi_index(tuple(idx), cshape)
