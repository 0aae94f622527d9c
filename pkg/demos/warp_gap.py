"""Warp a bar with a gap onto an unbroken bar and show what is left.

    python3 demos/warp_gap.py
"""
import numpy as np

from topokit.grid import betti_numbers
from topokit.synth import bars
from topokit.warp import critical_masks, homotopy_warp, warping_error


def show(mask, marks=None):
    for y in range(mask.shape[0]):
        row = ""
        for x in range(mask.shape[1]):
            if marks is not None and marks[y, x]:
                row += "x"
            else:
                row += "#" if mask[y, x] else "."
        print(row)


def main():
    sc = bars()
    src, tgt = sc.arrays["source"], sc.arrays["target"]
    print("source betti", betti_numbers(src), "target betti", betti_numbers(tgt))
    out = homotopy_warp(src, tgt)
    left = out != tgt
    print(f"after warping: {np.count_nonzero(left)} pixels still differ (x), "
          f"betti {betti_numbers(out)}")
    show(out, left)
    cm = critical_masks(src, tgt)
    print(f"critical pixels: m_g {cm.m_g.sum()}, m_f {cm.m_f.sum()}")
    print(f"warping error {warping_error(src, tgt):.5f}; the bulge costs nothing")


if __name__ == "__main__":
    main()
