import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import ndimage

from topokit.grid import InvalidArgument
from topokit.morse import build_field, check_field, dmt_critical_mask, dmt_loss, skeleton_1d
from topokit.persistence import build_complex
from topokit.synth import ridge_branches, two_peak, x_cross


def smooth_grid(seed, shape=(32, 32), sigma=2.0):
    f = ndimage.gaussian_filter(np.random.default_rng(seed).random(shape), sigma)
    return (f - f.min()) / (f.max() - f.min())


def test_zero_epsilon_leaves_everything_critical():
    f = np.random.default_rng(0).random((6, 7))
    vf = build_field(f, 0.0)
    cx = build_complex(f)
    assert vf.critical_count() == cx.cell_counts()
    assert vf.cancelled == 0 and not vf.v_pairs()


def test_two_peak_field():
    g = two_peak().arrays["grid"]
    pers = two_peak().meta["branch_persistence"]
    assert build_field(g, pers - 0.05).critical_count()[:2] == [2, 1]
    assert build_field(g, pers + 0.05).critical_count()[:2] == [1, 0]


def test_constant_grid_field():
    vf = build_field(np.full((5, 5), 0.5), 0.3)
    assert vf.critical_count() == [1, 0, 0]
    assert len(skeleton_1d(np.full((5, 5), 0.5), 0.3)) == 0


def test_negative_epsilon_rejected():
    with pytest.raises(InvalidArgument):
        build_field(np.zeros((3, 3)), -0.1)
    with pytest.raises(InvalidArgument):
        build_field(np.zeros((3, 3, 3)), 0.1)


@pytest.mark.parametrize("seed", range(3))
def test_field_valid_after_every_cancellation(seed):
    f = smooth_grid(seed, (12, 12), 1.0)
    prev = {"crit": None}

    def check(partner, birth, death, done):
        crit = set(np.flatnonzero(partner < 0).tolist())
        if prev["crit"] is not None:
            if done:
                assert prev["crit"] - crit == {birth, death}
                assert crit <= prev["crit"]
            else:
                assert crit == prev["crit"]
        prev["crit"] = crit
        check_field(type(vf0)(vf0.complex, partner.copy()))

    vf0 = build_field(f, 0.0)
    prev["crit"] = set(vf0.critical_cells.tolist())
    vf = build_field(f, 0.5, on_cancel=check)
    check_field(vf)
    assert vf.cancelled > 0
    # pairs are unique and symmetric
    cells = [c for pair in vf.v_pairs() for c in pair]
    assert len(cells) == len(set(cells))


def test_two_peak_skeleton_traces_ridge():
    sc = two_peak()
    fam = skeleton_1d(sc.arrays["grid"], 0.1)
    assert len(fam) == 1
    assert fam.persistences[0] == pytest.approx(sc.meta["branch_persistence"], abs=2e-3)
    ys, xs = np.nonzero(fam.query(0.1))
    row = sc.meta["peaks"][0][0]
    assert set(ys.tolist()) == {row}
    assert xs.min() == 0 and xs.max() == sc.arrays["grid"].shape[1] - 1


def test_x_cross_skeleton_equals_hand_ridge():
    sc = x_cross()
    fam = skeleton_1d(sc.arrays["grid"], 0.05)
    np.testing.assert_array_equal(fam.query(0.05), sc.arrays["ridge"])
    # four arm peaks meet in one saddle region: three saddle branches, each the peak above the centre
    peaks = sorted((1.0, 0.98, 0.9, 0.88))
    np.testing.assert_allclose(sorted(fam.persistences), [p - 0.6 for p in peaks[:3]], atol=1e-9)


def test_ridge_branches_persistences():
    sc = ridge_branches()
    fam = skeleton_1d(sc.arrays["grid"], 0.01)
    assert len(fam) == 10
    np.testing.assert_allclose(sorted(fam.persistences), sorted(sc.meta["branch_persistence"]),
                               atol=1e-9)
    ys = np.nonzero(fam.query(0.01))[0]
    assert set(ys.tolist()) == {sc.meta["row"]}


@pytest.mark.parametrize("seed", range(4))
def test_query_is_union_of_branches(seed):
    fam = skeleton_1d(smooth_grid(seed), 0.01)
    assert np.all(np.diff(fam.persistences) <= 0)
    owners = fam.owner
    for eps in np.linspace(0, 0.4, 9):
        want = np.zeros(fam.shape, bool)
        for i, b in enumerate(fam.branches):
            if b.persistence >= eps:
                want |= fam.branch_mask(i)
        np.testing.assert_array_equal(fam.query(eps), want)
        np.testing.assert_array_equal(fam.mask_of(fam.persistences >= eps), want)
    np.testing.assert_array_equal(owners >= 0, fam.mask_of(np.ones(len(fam), bool)))


@pytest.mark.parametrize("seed", range(10))
def test_recomputed_skeleton_is_monotone(seed):
    f = smooth_grid(100 + seed, (40, 40))
    eps = np.linspace(0.0, 0.3, 10)
    masks = [skeleton_1d(f, e).query(e) for e in eps]
    for a, b in zip(masks, masks[1:]):
        assert not (b & ~a).any()


@given(st.integers(0, 10_000), st.floats(0, 0.5), st.floats(0, 0.5))
def test_family_query_monotone(seed, e1, e2):
    fam = skeleton_1d(smooth_grid(seed, (16, 16), 1.5), 0.0)
    lo, hi = sorted((e1, e2))
    assert not (fam.query(hi) & ~fam.query(lo)).any()


def membrane_scene():
    """Vertical membrane with a weak stretch and a hallucinated side branch."""
    f = np.zeros((32, 32))
    f[2:30, 10] = 0.9
    f[14:17, 10] = 0.35
    f[20, 11:26] = 0.5
    f[20, 24:26] = 1.0
    f = ndimage.gaussian_filter(f, 0.8)
    return f / f.max()


def test_dmt_mask_covers_both_error_types():
    f = membrane_scene()
    m = dmt_critical_mask(f)
    assert m[14:17, 10].all()            # broken stretch (missed by thresholding)
    assert m[20, 12:24].all()            # hallucinated branch
    assert not (f[14:17, 10] >= 0.5).any()


def test_dmt_mask_constant_and_3d():
    assert not dmt_critical_mask(np.full((8, 8), 0.4)).any()
    vol = np.stack([smooth_grid(s, (12, 12)) for s in range(3)])
    m = dmt_critical_mask(vol)
    assert m.shape == vol.shape and m.dtype == bool
    assert dmt_critical_mask.__defaults__[0] == 0.2


def test_dmt_loss_zero_on_perfect_prediction():
    f = membrane_scene()
    m = dmt_critical_mask(f)
    gt = f >= 0.5
    assert dmt_loss(gt.astype(float), gt) == pytest.approx(0, abs=1e-5)
    manual = -np.log(np.clip(np.where(gt, f, 1 - f), 1e-7, 1))
    assert dmt_loss(f, gt) == pytest.approx((manual * m).sum() / f.size)
