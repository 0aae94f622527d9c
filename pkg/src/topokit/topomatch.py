"""Diagram matching, the squared matching loss, and critical-pixel targets.

Binary ground truth has all of its dots at the corner (birth 1, death 0) of
the diagram.  A prediction's dots nearest that corner are matched to the
ground-truth dots; the rest are pulled onto the diagonal.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import InvalidArgument, as_grid, same_shape
from .persistence import PersistenceDiagram, diagram

CORNER = (1.0, 0.0)


@dataclass(frozen=True)
class LossWeights:
    lambda_topo: float = 1e-4
    lambda_warp: float = 1e-4
    alpha_skeleton: float = 1.0
    beta_kl: float = 1.0
    trigger_weight: float = 10.0
    patch: int = 65

    def __post_init__(self):
        for name in ("lambda_topo", "lambda_warp", "alpha_skeleton", "beta_kl", "trigger_weight"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise InvalidArgument(f"{name}: must be finite and non-negative, got {v}")
        if self.patch < 1:
            raise InvalidArgument(f"patch: must be positive, got {self.patch}")


@dataclass(frozen=True)
class MatchedPair:
    dim: int
    pred: int          # index into the prediction diagram, -1 for an unmatched gt dot
    gt: int            # index into the gt diagram, -1 when matched to the diagonal
    birth: float       # current birth of the moving dot
    death: float
    target_birth: float
    target_death: float

    @property
    def cost(self) -> float:
        return (self.birth - self.target_birth) ** 2 + (self.death - self.target_death) ** 2


@dataclass(frozen=True)
class Matching:
    pairs: list[MatchedPair] = field(default_factory=list)

    def for_dim(self, dim: int) -> list[MatchedPair]:
        return [p for p in self.pairs if p.dim == dim]

    def structure(self) -> list[tuple[int, int, int]]:
        return [(p.dim, p.pred, p.gt) for p in self.pairs]


@dataclass(frozen=True)
class GradientTarget:
    pixel: int
    current: float
    target: float
    role: str          # birth | death

    @property
    def gradient(self) -> float:
        return 2.0 * (self.current - self.target)


def _corner_order(birth: np.ndarray, death: np.ndarray) -> np.ndarray:
    d2 = (birth - CORNER[0]) ** 2 + (death - CORNER[1]) ** 2
    return np.argsort(d2, kind="stable")


def match_diagrams(pred: PersistenceDiagram, gt: PersistenceDiagram,
                   dims: list[int] | None = None) -> Matching:
    """Per dimension, the |gt| dots closest to the corner go to gt dots.

    Surplus prediction dots go to their diagonal projections; when the
    prediction has fewer dots, surplus gt dots are charged against theirs.
    """
    if pred.ndim and gt.ndim and pred.ndim != gt.ndim:
        raise InvalidArgument(f"gt: diagram of a {gt.ndim}D grid cannot match a {pred.ndim}D prediction")
    if dims is None:
        dims = sorted(set(pred.dim.tolist()) | set(gt.dim.tolist()))
    pairs: list[MatchedPair] = []
    for d in dims:
        pi = np.flatnonzero(pred.dim == d)
        gi = np.flatnonzero(gt.dim == d)
        pi = pi[_corner_order(pred.birth[pi], pred.death[pi])]
        gi = gi[_corner_order(gt.birth[gi], gt.death[gi])]
        k = min(len(pi), len(gi))
        for a, b in zip(pi[:k], gi[:k]):
            pairs.append(MatchedPair(d, int(a), int(b), float(pred.birth[a]), float(pred.death[a]),
                                     float(gt.birth[b]), float(gt.death[b])))
        for a in pi[k:]:
            m = 0.5 * (pred.birth[a] + pred.death[a])
            pairs.append(MatchedPair(d, int(a), -1, float(pred.birth[a]), float(pred.death[a]),
                                     float(m), float(m)))
        for b in gi[k:]:
            m = 0.5 * (gt.birth[b] + gt.death[b])
            pairs.append(MatchedPair(d, -1, int(b), float(gt.birth[b]), float(gt.death[b]),
                                     float(m), float(m)))
    return Matching(pairs)


def topo_loss(matching: Matching) -> float:
    return float(sum(p.cost for p in matching.pairs))


def gradient_targets(matching: Matching, pred: PersistenceDiagram) -> list[GradientTarget]:
    """Two targets per matched prediction dot: its birth and death critical pixels."""
    out: list[GradientTarget] = []
    for p in matching.pairs:
        if p.pred < 0:
            continue
        bp = int(pred.birth_pixel[p.pred])
        dp = int(pred.death_pixel[p.pred])
        if bp >= 0:
            out.append(GradientTarget(bp, p.birth, p.target_birth, "birth"))
        if dp >= 0:
            out.append(GradientTarget(dp, p.death, p.target_death, "death"))
    return out


def dense_gradient(targets: list[GradientTarget], shape) -> np.ndarray:
    """Sum target gradients onto a pixel array of the given shape."""
    g = np.zeros(int(np.prod(shape)))
    for t in targets:
        g[t.pixel] += t.gradient
    return g.reshape(shape)


def binary_diagram(gt_mask, relative_frame: bool = False) -> PersistenceDiagram:
    return diagram(np.asarray(gt_mask, dtype=np.float64), relative_frame)


def topological_loss(likelihood, gt_mask, relative_frame: bool = False,
                     dims: list[int] | None = None):
    """Loss value, matching, targets and dense gradient for one patch."""
    f = as_grid(likelihood, "likelihood")
    g = np.asarray(gt_mask, dtype=np.float64)
    same_shape(f, g, "likelihood/gt")
    dp = diagram(f, relative_frame)
    dg = diagram(g, relative_frame)
    if dims is None:
        dims = list(range(f.ndim))
    m = match_diagrams(dp, dg, dims)
    targets = gradient_targets(m, dp)
    return topo_loss(m), m, targets, dense_gradient(targets, f.shape)


def patchwise_topological_loss(likelihood, gt_mask, patch: int = 65,
                               relative_frame: bool = True):
    """Sum of per-patch losses over a tiling of the image, with a dense gradient."""
    f = as_grid(likelihood, "likelihood")
    g = np.asarray(gt_mask, dtype=np.float64)
    same_shape(f, g, "likelihood/gt")
    total = 0.0
    grad = np.zeros(f.shape)
    starts = [range(0, s, patch) for s in f.shape]
    for corner in np.ndindex(*(len(r) for r in starts)):
        sl = tuple(slice(r[i], r[i] + patch) for r, i in zip(starts, corner))
        loss, _, _, gr = topological_loss(f[sl], g[sl], relative_frame)
        total += loss
        grad[sl] += gr
    return total, grad


# ---------------------------------------------------------------------------
# prior on the number of components of a trigger mask

def _dominant_dot(dgm: PersistenceDiagram) -> int:
    pers = dgm.persistence
    best = pers.max()
    cand = np.flatnonzero(pers == best)
    return int(cand[np.argmin(dgm.birth_cell[cand])])


def trigger_topo_loss(mask_grid, diagram_fn=None):
    """Sum of squared persistence over all 0-dim dots except the most persistent.

    Returns (value, targets).  Each surviving dot pushes its birth pixel down
    toward its death value and its death pixel up toward its birth value.
    """
    f = as_grid(mask_grid, "mask_grid")
    dgm = diagram(f).select(0) if diagram_fn is None else diagram_fn(f)
    if len(dgm) == 0:
        return 0.0, []
    star = _dominant_dot(dgm)
    value = 0.0
    targets: list[GradientTarget] = []
    for i in range(len(dgm)):
        if i == star:
            continue
        b, d = float(dgm.birth[i]), float(dgm.death[i])
        value += (b - d) ** 2
        targets.append(GradientTarget(int(dgm.birth_pixel[i]), b, d, "birth"))
        targets.append(GradientTarget(int(dgm.death_pixel[i]), d, b, "death"))
    return value, targets
