"""Segmentation metrics: overlap, adapted Rand, variation of information, Betti error."""
from __future__ import annotations

import numpy as np

from .grid import Adjacency, InvalidArgument, as_mask, betti_numbers, connected_components, same_shape


def overlap_scores(pred, gt) -> tuple[float, float]:
    """(dice, pixel accuracy); dice is 1 when both masks are empty."""
    p = as_mask(pred, "pred")
    g = as_mask(gt, "gt")
    same_shape(p, g)
    inter = np.count_nonzero(p & g)
    tot = np.count_nonzero(p) + np.count_nonzero(g)
    dice = 1.0 if tot == 0 else 2.0 * inter / tot
    acc = np.count_nonzero(p == g) / p.size
    return float(dice), float(acc)


def region_labels(mask, regions_from: str = "foreground",
                  adjacency: Adjacency | int | None = None) -> np.ndarray:
    """Component labelling used as the clustering; 0 marks the excluded set."""
    m = as_mask(mask)
    if regions_from == "foreground":
        return connected_components(m, "foreground", adjacency)[0]
    if regions_from == "complement":
        return connected_components(m, "background", adjacency)[0]
    raise InvalidArgument(f"regions_from: expected foreground or complement, got {regions_from!r}")


def contingency(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Dense count table n_ij over label pairs (a = rows, b = columns)."""
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    na = int(a.max()) + 1 if a.size else 1
    nb = int(b.max()) + 1 if b.size else 1
    return np.bincount(a * nb + b, minlength=na * nb).reshape(na, nb)


def adapted_rand_from_labels(pred_labels: np.ndarray, gt_labels: np.ndarray) -> float:
    sel = gt_labels.ravel() != 0
    if not sel.any():
        raise InvalidArgument("gt: no labelled pixels; adapted Rand is undefined")
    table = contingency(gt_labels.ravel()[sel], pred_labels.ravel()[sel]).astype(np.float64)
    sum_ab = (table ** 2).sum()
    sum_a = (table.sum(axis=1) ** 2).sum()
    sum_b = (table.sum(axis=0) ** 2).sum()
    precision = sum_ab / sum_b
    recall = sum_ab / sum_a
    return float(2 * precision * recall / (precision + recall))


def adapted_rand(pred, gt, regions_from: str = "foreground",
                 adjacency: Adjacency | int | None = None) -> float:
    """F-score of Rand precision/recall over pixels labelled in the ground truth."""
    p = as_mask(pred, "pred")
    g = as_mask(gt, "gt")
    same_shape(p, g)
    return adapted_rand_from_labels(region_labels(p, regions_from, adjacency),
                                    region_labels(g, regions_from, adjacency))


def _conditional_entropy(table: np.ndarray, axis: int) -> float:
    """H(other | axis labels) from a count table, natural log."""
    n = table.sum()
    marg = table.sum(axis=axis)
    nz = table > 0
    marg = np.broadcast_to(np.expand_dims(marg, axis), table.shape)[nz]
    h = -(table[nz] / n * np.log(table[nz] / marg)).sum()
    return float(h) + 0.0   # no negative zero


def voi_from_labels(pred_labels: np.ndarray, gt_labels: np.ndarray) -> tuple[float, float, float]:
    table = contingency(pred_labels, gt_labels).astype(np.float64)   # rows pred, cols gt
    split = _conditional_entropy(table, axis=0)    # H(pred | gt)
    merge = _conditional_entropy(table, axis=1)    # H(gt | pred)
    return split + merge, split, merge


def voi(pred, gt, regions_from: str = "foreground",
        adjacency: Adjacency | int | None = None) -> tuple[float, float, float]:
    """(total, split, merge); split = H(pred|gt), merge = H(gt|pred), label 0 included."""
    p = as_mask(pred, "pred")
    g = as_mask(gt, "gt")
    same_shape(p, g)
    return voi_from_labels(region_labels(p, regions_from, adjacency),
                           region_labels(g, regions_from, adjacency))


def patch_corners(shape, patch: int, n_patches: int, seed: int) -> np.ndarray:
    if any(patch > s for s in shape):
        raise InvalidArgument(f"patch: {patch} exceeds grid shape {shape}")
    if patch < 1 or n_patches < 1:
        raise InvalidArgument("patch/n_patches: must be positive")
    rng = np.random.default_rng(seed)
    return np.stack([rng.integers(0, s - patch + 1, size=n_patches) for s in shape], axis=1)


def betti_error(pred, gt, patch: int = 64, n_patches: int = 100, seed: int = 0,
                dim: int | None = None, adjacency: Adjacency | int | None = None) -> float:
    """Mean |betti_dim(pred) - betti_dim(gt)| over seeded random patches."""
    p = as_mask(pred, "pred")
    g = as_mask(gt, "gt")
    same_shape(p, g)
    if dim is None:
        dim = 1 if p.ndim == 2 else 2
    if not 0 <= dim <= p.ndim - 1:
        raise InvalidArgument(f"dim: must lie in 0..{p.ndim - 1}, got {dim}")
    total = 0
    for c in patch_corners(p.shape, patch, n_patches, seed):
        sl = tuple(slice(int(o), int(o) + patch) for o in c)
        total += abs(betti_numbers(p[sl], adjacency)[dim] - betti_numbers(g[sl], adjacency)[dim])
    return total / n_patches


def all_metrics(pred, gt, patch: int = 64, n_patches: int = 100, seed: int = 0,
                regions_from: str = "foreground", warping: bool = True) -> dict:
    """Every score in one dictionary, with the parameters that produced it."""
    from .warp import warping_error
    p = as_mask(pred, "pred")
    g = as_mask(gt, "gt")
    same_shape(p, g)
    dice, acc = overlap_scores(p, g)
    v, split, merge = voi(p, g, regions_from)
    patch = min(patch, *p.shape)
    out = {
        "dice": dice,
        "pixel_accuracy": acc,
        "voi": v,
        "voi_split": split,
        "voi_merge": merge,
        "betti_error": betti_error(p, g, patch, n_patches, seed),
    }
    try:
        out["adapted_rand"] = adapted_rand(p, g, regions_from)
    except InvalidArgument:
        out["adapted_rand"] = None
    if warping:
        out["warping_error"] = warping_error(p, g)
    out["params"] = {"patch": patch, "n_patches": n_patches, "seed": seed,
                     "regions_from": regions_from, "betti_dim": 1 if p.ndim == 2 else 2}
    return out
