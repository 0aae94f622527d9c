"""Gaussian threshold model over skeleton families, sampling and proofreading simulation.

A branch with persistence e_b survives a sampled threshold eps iff
e_b >= eps, so under eps ~ N(mu, sigma) it is kept with probability
Phi((e_b - mu) / sigma).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage, special

from .grid import Adjacency, InvalidArgument, as_grid, as_mask, connected_components, same_shape, structure
from .metrics import voi
from .morse import SkeletonFamily


@dataclass(frozen=True)
class GaussianThreshold:
    mu: float
    sigma: float

    def __post_init__(self):
        if not (math.isfinite(self.mu) and math.isfinite(self.sigma)):
            raise InvalidArgument(f"mu/sigma: must be finite, got ({self.mu}, {self.sigma})")
        if self.sigma <= 0:
            raise InvalidArgument(f"sigma: must be > 0, got {self.sigma}")

    def cdf(self, x) -> np.ndarray:
        return special.ndtr((np.asarray(x, float) - self.mu) / self.sigma)

    def draw(self, seed: int, n: int) -> np.ndarray:
        """n thresholds mu + sigma*z with z from a standard normal seeded by `seed`.

        Draws are prefix-consistent: the first k of n draws equal a k-draw
        with the same seed.
        """
        return self.mu + self.sigma * np.random.default_rng(seed).standard_normal(n)


@dataclass(frozen=True)
class BranchProbability:
    branch_id: int
    p_include: float
    confidence: float
    uncertainty: float


@dataclass(frozen=True, eq=False)
class SegmentationSample:
    epsilon_used: float
    skeleton: np.ndarray
    segmentation: np.ndarray


def branch_probabilities(family: SkeletonFamily, g: GaussianThreshold) -> list[BranchProbability]:
    p = g.cdf(family.persistences) if len(family) else np.empty(0)
    out = []
    for i, pi in enumerate(p):
        conf = abs(float(pi) - 0.5)
        out.append(BranchProbability(i, float(pi), conf, 1.0 - 2.0 * conf))
    return out


def grow_segmentation(skeleton, initial_binary, adjacency: Adjacency | int | None = None) -> np.ndarray:
    """Keep the components of initial_binary that meet the skeleton, plus the skeleton."""
    s = as_mask(skeleton, "skeleton")
    b = as_mask(initial_binary, "initial_binary")
    same_shape(s, b, "skeleton/initial_binary")
    labels, _ = connected_components(b, "foreground", adjacency)
    hit = np.unique(labels[s])
    keep = np.isin(labels, hit[hit > 0])
    return keep | s


def sample_skeleton(family: SkeletonFamily, g: GaussianThreshold, seed: int,
                    initial_binary=None) -> SegmentationSample:
    eps = float(g.draw(seed, 1)[0])
    return _sample_at(family, eps, initial_binary)


def sample_skeletons(family: SkeletonFamily, g: GaussianThreshold, seed: int, n: int,
                     initial_binary=None) -> list[SegmentationSample]:
    if n < 1:
        raise InvalidArgument(f"n: must be >= 1, got {n}")
    return [_sample_at(family, float(e), initial_binary) for e in g.draw(seed, n)]


def _sample_at(family, eps, initial_binary):
    sk = family.query(eps)
    seg = sk if initial_binary is None else grow_segmentation(sk, initial_binary)
    return SegmentationSample(eps, sk, seg)


def empirical_uncertainty(samples) -> np.ndarray:
    """Per-pixel variance of the indicator across samples."""
    samples = list(samples)
    if len(samples) < 2:
        raise InvalidArgument(f"samples: need at least 2, got {len(samples)}")
    stack = np.stack([as_mask(s, "samples") for s in samples]).astype(np.float64)
    return stack.var(axis=0)


def skeleton_masked_loss(likelihood, gt, skeleton, eps: float = 1e-7) -> float:
    """Cross-entropy summed over skeleton pixels, divided by the pixel count."""
    f = as_grid(likelihood, "likelihood")
    g = as_mask(gt, "gt")
    s = as_mask(skeleton, "skeleton")
    same_shape(f, g, "likelihood/gt")
    same_shape(f, s, "likelihood/skeleton")
    f = np.clip(f, eps, 1 - eps)
    bce = -(g * np.log(f) + (~g) * np.log(1 - f))
    return float(bce[s].sum() / f.size)


def kl_gaussians(q: GaussianThreshold, p: GaussianThreshold) -> float:
    """KL(q || p) for 1D normals."""
    return (math.log(p.sigma / q.sigma)
            + (q.sigma ** 2 + (q.mu - p.mu) ** 2) / (2 * p.sigma ** 2) - 0.5)


def gt_branch_labels(family: SkeletonFamily, gt_mask, min_fraction: float = 0.5) -> np.ndarray:
    """A branch is correct iff at least half of its pixels lie within 1 pixel of gt foreground."""
    g = as_mask(gt_mask, "gt")
    if g.shape != tuple(family.shape):
        raise InvalidArgument(f"gt: shape {g.shape} does not match family shape {tuple(family.shape)}")
    near = ndimage.binary_dilation(g, structure=structure(g.ndim, 4 if g.ndim == 2 else 6)).ravel()
    out = np.zeros(len(family), bool)
    for i, b in enumerate(family.branches):
        if b.pixels.size:
            out[i] = near[b.pixels].mean() >= min_fraction
    return out


@dataclass
class ProofreadCurve:
    rows: list[tuple[int, float, float]] = field(default_factory=list)   # (step, voi, pixel_error)
    visited: list[int] = field(default_factory=list)
    final_include: np.ndarray | None = None
    final_segmentation: np.ndarray | None = None

    @property
    def steps(self) -> int:
        return len(self.rows) - 1


def proofread_simulate(family: SkeletonFamily, g: GaussianThreshold, gt_labels, metric_gt,
                       order: str = "uncertainty_desc", seed: int = 0,
                       initial_binary=None) -> ProofreadCurve:
    """Correct one misclassified branch per step and record (step, VOI, pixel error).

    The start is the segmentation at eps = mu.  VOI compares the grown
    segmentation with metric_gt; pixel error is the fraction of pixels where
    the current skeleton differs from the all-branches-correct skeleton.
    """
    labels = np.asarray(gt_labels, bool)
    if labels.shape != (len(family),):
        raise InvalidArgument(f"gt_labels: expected {len(family)} entries, got {labels.shape}")
    mgt = as_mask(metric_gt, "metric_gt")
    if mgt.shape != tuple(family.shape):
        raise InvalidArgument(f"metric_gt: shape {mgt.shape} does not match family shape")
    include = family.persistences >= g.mu if len(family) else np.zeros(0, bool)
    wrong = np.flatnonzero(include != labels)
    if order == "uncertainty_desc":
        unc = np.array([b.uncertainty for b in branch_probabilities(family, g)])
        visit = wrong[np.lexsort((wrong, -unc[wrong]))] if wrong.size else wrong
    elif order == "random":
        visit = np.random.default_rng(seed).permutation(wrong)
    else:
        raise InvalidArgument(f"order: expected uncertainty_desc or random, got {order!r}")

    target = family.mask_of(labels)
    n = target.size

    def segment(inc):
        sk = family.mask_of(inc)
        seg = sk if initial_binary is None else grow_segmentation(sk, initial_binary)
        return sk, seg

    curve = ProofreadCurve()
    sk, seg = segment(include)
    curve.rows.append((0, voi(seg, mgt)[0], np.count_nonzero(sk != target) / n))
    for step, b in enumerate(visit, start=1):
        include = include.copy()
        include[b] = labels[b]
        sk, seg = segment(include)
        curve.rows.append((step, voi(seg, mgt)[0], np.count_nonzero(sk != target) / n))
        curve.visited.append(int(b))
    curve.final_include = include
    curve.final_segmentation = seg
    return curve
