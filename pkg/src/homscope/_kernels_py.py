"""Numpy implementation of the detection kernel.

Used when the compiled extension is unavailable, and as the reference the
compiled kernel is tested against.  Both consume the same pre-drawn uniforms
and therefore return identical integer tallies.
"""

import numpy as np

# Pair outcome codes. Photon "a" and photon "b" are the two input photons.
CODE_11_A_TO_D = 0
CODE_11_A_TO_C = 1
CODE_20 = 2
CODE_02 = 3

# Output arm D feeds detectors 1-4 (bank 0), arm C feeds detectors 5-8 (bank 1).
_ARM_A = np.array([0, 1, 1, 0], dtype=np.intp)
_ARM_B = np.array([1, 0, 1, 0], dtype=np.intp)


def detect_pairs(codes, uniforms, transmission, cum_ratios, efficiencies):
    """Route photon pairs through the two 1x4 splitters and binary detectors.

    ``uniforms`` has shape (n, 6): transmission a/b, splitter a/b, efficiency
    a/b.  ``cum_ratios`` has shape (2, 3): the first three cumulative splitter
    ratios of each bank.  Returns ``(coincidences, singles)`` where
    ``coincidences[i, j]`` (i < j) counts two-channel clicks and ``singles``
    counts clicks per channel.
    """
    codes = np.asarray(codes, dtype=np.intp)
    u = np.asarray(uniforms, dtype=np.float64)
    cum = np.asarray(cum_ratios, dtype=np.float64)
    eff = np.asarray(efficiencies, dtype=np.float64)

    arm_a = _ARM_A[codes]
    arm_b = _ARM_B[codes]
    ch_a = arm_a * 4 + (u[:, 2, None] >= cum[arm_a]).sum(axis=1)
    ch_b = arm_b * 4 + (u[:, 3, None] >= cum[arm_b]).sum(axis=1)
    det_a = (u[:, 0] < transmission[0]) & (u[:, 4] < eff[ch_a])
    det_b = (u[:, 1] < transmission[1]) & (u[:, 5] < eff[ch_b])

    both = det_a & det_b
    same = both & (ch_a == ch_b)
    distinct = both & ~same
    lo = np.minimum(ch_a[distinct], ch_b[distinct])
    hi = np.maximum(ch_a[distinct], ch_b[distinct])
    coinc = np.bincount(lo * 8 + hi, minlength=64).astype(np.int64).reshape(8, 8)
    singles = (
        np.bincount(ch_a[det_a], minlength=8)
        + np.bincount(ch_b[det_b], minlength=8)
        - np.bincount(ch_a[same], minlength=8)
    ).astype(np.int64)
    return coinc, singles
