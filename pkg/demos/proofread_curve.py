"""Sample skeletons of a ridge family and compare proofreading orders.

    python3 demos/proofread_curve.py
"""
import numpy as np

from topokit.morse import skeleton_1d
from topokit.probstruct import (GaussianThreshold, branch_probabilities, empirical_uncertainty,
                                proofread_simulate, sample_skeletons)
from topokit.synth import ridge_branches


def main():
    fam = skeleton_1d(ridge_branches().arrays["grid"], 0.01)
    g = GaussianThreshold(0.3, 0.15)
    print("branch  persistence  p_include  uncertainty")
    for i, bp in enumerate(branch_probabilities(fam, g)):
        print(f"{i:6d}  {fam.persistences[i]:11.3f}  {bp.p_include:9.3f}  {bp.uncertainty:11.3f}")

    samples = sample_skeletons(fam, g, seed=0, n=200)
    u = empirical_uncertainty([s.skeleton for s in samples])
    print(f"pixel variance over 200 samples: max {u.max():.3f}, "
          f"{np.count_nonzero(u > 0)} uncertain pixels")

    # pretend the strong branches are real, with one strong mistake and one faint true branch
    labels = fam.persistences >= 0.4
    labels[np.argmin(np.abs(fam.persistences - 0.478))] = False
    labels[np.argmin(np.abs(fam.persistences - 0.111))] = True
    gt = fam.mask_of(labels)
    for order, seed in (("uncertainty_desc", 0), ("random", 1)):
        curve = proofread_simulate(fam, g, labels, gt, order, seed)
        steps = " ".join(f"{v:.3f}" for _, v, _ in curve.rows)
        print(f"{order:>16}: VOI per step {steps}")


if __name__ == "__main__":
    main()
