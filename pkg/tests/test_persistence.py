import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from oracles import diagram_oracle, diagram_rows
from topokit.grid import betti_numbers, threshold
from topokit.persistence import (build_complex, compute_diagram, diagram, persistence_pairs,
                                 zero_dim_sweep)

grids2d = arrays(float, st.tuples(st.integers(1, 7), st.integers(1, 7)),
                 elements=st.floats(0, 1, width=32))


def distinct_grid(rng, shape):
    return rng.permutation(np.linspace(0.01, 0.99, int(np.prod(shape)))).reshape(shape)


def test_cell_counts_2x2():
    cx = build_complex(np.zeros((2, 2)))
    assert cx.cell_counts() == [4, 4, 1]


def test_frame_pads_grid():
    g = np.random.default_rng(0).random((3, 3))
    cx = build_complex(g, relative_frame=True)
    assert cx.vertex_values.shape == (5, 5)
    assert cx.cshape == (9, 9)
    assert np.all(cx.vertex_values[0] == 1.0) and np.all(cx.vertex_values[:, -1] == 1.0)
    np.testing.assert_array_equal(cx.vertex_values[1:-1, 1:-1], g)
    # cells on the frame ring have no input pixel
    pix = cx.pixel.reshape(cx.cshape)
    assert np.all(pix[0] == -1) and np.all(pix[:, -1] == -1)


@pytest.mark.parametrize("shape", [(4, 5), (3, 3, 4)])
def test_cell_value_is_vertex_min(shape):
    g = np.random.default_rng(1).random(shape)
    cx = build_complex(g)
    strides = np.cumprod((1,) + cx.cshape[::-1])[:-1][::-1]
    for c in range(cx.n_cells):
        coords = cx.cell_coords(c)
        axes = [ax for ax, v in enumerate(coords) if v % 2]
        verts = []
        for bits in np.ndindex(*([2] * len(axes))):
            v = list(coords)
            for ax, b in zip(axes, bits):
                v[ax] += 1 if b else -1
            verts.append(g[tuple(x // 2 for x in v)])
        assert cx.values[c] == min(verts)
        assert cx.values[c] == g.ravel()[cx.pixel[c]]
        for f in cx.faces(c):
            assert cx.values[f] >= cx.values[c]
        assert sum(strides * coords) == c


def test_filtration_order_ties():
    cx = build_complex(np.full((2, 3), 0.4))
    dims = cx.dims[cx.order]
    assert np.all(np.diff(dims) >= 0)
    for d in range(3):
        ids = cx.order[dims == d]
        assert np.all(np.diff(ids) > 0)


def test_constant_grid_one_essential_dot():
    dgm = diagram(np.full((4, 4), 0.3))
    assert dgm.multiset() == [(0, 0.3, np.inf)]
    assert dgm.death[0] == 0.3


def test_one_by_five_example():
    dgm = diagram(np.array([[0.1, 0.9, 0.2, 0.8, 0.1]]))
    assert dgm.multiset() == [(0, 0.8, 0.2), (0, 0.9, np.inf)]
    # essential dot dies at the minimum; unit convention reports 1.0
    ess = dgm.essential
    assert dgm.death[ess][0] == pytest.approx(0.1)
    assert diagram(np.array([[0.1, 0.9, 0.2, 0.8, 0.1]]), unit_essential=True).death[ess][0] == 1.0


def test_two_peak_profile():
    prof = np.array([[0.2, 0.7, 0.3, 1.0, 0.1]])
    got = zero_dim_sweep(prof).multiset()
    assert got == [(0, 0.7, 0.3), (0, 1.0, np.inf)]


def test_monotone_grid_only_essential():
    g = np.add.outer(np.arange(6), np.arange(7)) / 12.0
    assert len(zero_dim_sweep(g)) == 1
    assert diagram(g).multiset() == [(0, round(11 / 12, 12), np.inf)]


def test_matches_oracle_on_random_grids():
    rng = np.random.default_rng(2024)
    for _ in range(100):
        g = distinct_grid(rng, (8, 8))
        want = diagram_oracle(g)
        assert diagram_rows(diagram(g)) == want
        assert diagram_rows(diagram(g, method="reduction")) == want
        assert zero_dim_sweep(g).multiset() == diagram(g).multiset(dim=0)


@pytest.mark.parametrize("seed", range(8))
def test_reduction_cross_check_3d(seed):
    g = distinct_grid(np.random.default_rng(seed), (5, 5, 4))
    a = diagram(g)
    b = diagram(g, method="reduction")
    assert a.multiset() == b.multiset()
    assert a.max_dim() <= 2
    assert zero_dim_sweep(g).multiset() == a.multiset(dim=0)


@pytest.mark.parametrize("seed", range(5))
def test_betti_at_every_threshold_3d(seed):
    g = distinct_grid(np.random.default_rng(seed), (5, 4, 5))
    dgm = diagram(g)
    for a in np.unique(g):
        want = betti_numbers(g >= a)
        assert tuple(dgm.betti_at(a, k) for k in range(3)) == want


def test_pairs_keep_zero_persistence():
    g = np.array([[0.5, 0.5, 0.5], [0.5, 0.2, 0.5]])
    dims, pb, pd, ess = persistence_pairs(build_complex(g))
    cx = build_complex(g)
    assert np.any(cx.values[pb] == cx.values[pd])
    assert len(diagram(g)) < pb.size + ess.size


def test_frame_y_shape_gives_two_loops():
    # stem to the bottom edge, two arms to the top edge: three boundary contacts
    m = np.zeros((9, 9))
    m[4:, 4] = 1.0
    m[4, 1:8] = 1.0
    m[:5, 1] = m[:5, 7] = 1.0
    # the frame ring alone already carries one loop; the crossing structure adds two
    empty = diagram(np.zeros_like(m), relative_frame=True).betti_at(0.5, 1)
    assert empty == 1
    assert diagram(m, relative_frame=True).betti_at(0.5, 1) - empty == 2
    assert diagram(m).betti_at(0.5, 1) == 0


def test_unknown_method():
    with pytest.raises(ValueError, match="method"):
        compute_diagram(build_complex(np.zeros((2, 2))), method="bogus")


# multiples of 1/64 so the shift is exact and keeps the ties
dyadic2d = arrays(np.int64, st.tuples(st.integers(1, 7), st.integers(1, 7)),
                  elements=st.integers(0, 64)).map(lambda a: a / 64.0)


@given(dyadic2d, st.integers(-32, 32).map(lambda k: k / 64.0))
def test_constant_shift(g, c):
    a = diagram(g)
    b = diagram(g + c)
    np.testing.assert_array_equal(a.birth_cell, b.birth_cell)
    np.testing.assert_array_equal(a.death_cell, b.death_cell)
    np.testing.assert_allclose(a.shifted(c).birth, b.birth, atol=1e-12)
    np.testing.assert_allclose(a.shifted(c).death, b.death, atol=1e-12)


@given(grids2d)
def test_diagram_consistent_with_betti(g):
    dgm = diagram(g)
    assert np.all(dgm.persistence >= 0)
    for a in np.unique(g):
        if not 0 < a < 1:
            continue
        assert tuple(dgm.betti_at(a, k) for k in (0, 1)) == betti_numbers(threshold(g, a))


@given(grids2d)
def test_sweep_equals_diagram_dim0(g):
    assert zero_dim_sweep(g).multiset() == diagram(g).multiset(dim=0)
