import numpy as np
import pytest

from oracles import flood_label
from topokit.grid import InvalidArgument, betti_numbers
from topokit.persistence import diagram
from topokit.synth import SCENES, bars, dumbbell, make, rings, spur_ring, two_peak


@pytest.mark.parametrize("n", [1, 2, 3])
def test_rings_topology(n):
    sc = rings(n)
    assert betti_numbers(sc.arrays["mask"]) == (n, n)
    assert flood_label(sc.arrays["mask"], 8)[1] == n


def test_bars_meta_matches_arrays():
    sc = bars()
    assert betti_numbers(sc.arrays["target"]) == tuple(sc.meta["betti_target"])
    assert betti_numbers(sc.arrays["source"]) == (2, 0)


def test_two_peak_diagram():
    sc = two_peak()
    dgm = diagram(sc.arrays["grid"])
    f = ~dgm.essential & (dgm.dim == 0)
    assert dgm.persistence[f].max() == pytest.approx(sc.meta["branch_persistence"], abs=2e-3)


def test_dumbbell_is_one_component():
    assert flood_label(dumbbell().arrays["mask"], 4)[1] == 1


def test_spur_ring_diagram():
    assert diagram(spur_ring().arrays["grid"]).multiset() == [
        (0, 0.7, 0.4), (0, 0.8, 0.5), (0, 1.0, np.inf), (1, 0.3, 0.0)]


@pytest.mark.parametrize("name", sorted(SCENES))
def test_scenes_are_deterministic(name):
    a, b = make(name), make(name)
    assert a.arrays.keys() == b.arrays.keys()
    for k in a.arrays:
        np.testing.assert_array_equal(a.arrays[k], b.arrays[k])


def test_unknown_scene():
    with pytest.raises(InvalidArgument):
        make("spiral")
    with pytest.raises(InvalidArgument):
        rings(0)
