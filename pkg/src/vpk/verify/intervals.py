"""Outward-rounded interval arithmetic over numpy arrays.

Every primitive widens its result by one ulp on each side, so bounds remain
valid enclosures under IEEE round-to-nearest.  Boxes are (lo, hi) pairs of
equal-shape float arrays; polynomial evaluation broadcasts over leading axes
so branch-and-bound loops can score thousands of boxes per call.
"""

from __future__ import annotations

import numpy as np


def _down(x):
    return np.nextafter(x, -np.inf)


def _up(x):
    return np.nextafter(x, np.inf)


def iadd(alo, ahi, blo, bhi):
    return _down(alo + blo), _up(ahi + bhi)


def imul(alo, ahi, blo, bhi):
    p1 = alo * blo
    p2 = alo * bhi
    p3 = ahi * blo
    p4 = ahi * bhi
    lo = np.minimum(np.minimum(p1, p2), np.minimum(p3, p4))
    hi = np.maximum(np.maximum(p1, p2), np.maximum(p3, p4))
    return _down(lo), _up(hi)


def iscale(c, lo, hi):
    c = float(c)
    if c >= 0:
        return _down(c * lo), _up(c * hi)
    return _down(c * hi), _up(c * lo)


def ipow(lo, hi, k):
    """Interval integer power; even powers account for sign changes."""
    if k == 0:
        return np.ones_like(lo), np.ones_like(hi)
    if k == 1:
        return lo, hi
    if k % 2 == 1:
        return _down(lo ** k), _up(hi ** k)
    abs_lo = np.abs(lo)
    abs_hi = np.abs(hi)
    big = np.maximum(abs_lo, abs_hi)
    small = np.where((lo <= 0) & (hi >= 0), 0.0, np.minimum(abs_lo, abs_hi))
    return _down(small ** k), _up(big ** k)


def poly_bounds(poly, lo, hi):
    """Enclosure of ``poly`` over boxes.

    ``lo`` and ``hi`` have shape (..., n_vars); the result pair has the
    leading shape.  Per-variable power tables are shared across terms.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    powers = {}

    def var_power(i, e):
        key = (i, e)
        if key not in powers:
            powers[key] = ipow(lo[..., i], hi[..., i], e)
        return powers[key]

    out_shape = lo.shape[:-1]
    tot_lo = np.zeros(out_shape)
    tot_hi = np.zeros(out_shape)
    for exps, coeff in poly.terms.items():
        term_lo = np.ones(out_shape)
        term_hi = np.ones(out_shape)
        for i, e in enumerate(exps):
            if e:
                plo, phi = var_power(i, e)
                term_lo, term_hi = imul(term_lo, term_hi, plo, phi)
        term_lo, term_hi = iscale(coeff, term_lo, term_hi)
        tot_lo, tot_hi = iadd(tot_lo, tot_hi, term_lo, term_hi)
    return tot_lo, tot_hi


def affine_bounds(A, c, lo, hi):
    """Fast range of A x + c over a box, widened by a relative margin.

    Dot products are evaluated in plain float and then padded proportionally
    to the magnitudes involved, which over-covers accumulated rounding by
    orders of magnitude.  Suitable for pruning, not for final certification.
    """
    A = np.asarray(A, dtype=float)
    c = np.asarray(c, dtype=float)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    pos = np.clip(A, 0.0, None)
    neg = np.clip(A, None, 0.0)
    row_lo = pos @ lo + neg @ hi + c
    row_hi = pos @ hi + neg @ lo + c
    scale = np.abs(A) @ np.maximum(np.abs(lo), np.abs(hi)) + np.abs(c) + 1.0
    pad = 1e-9 * scale
    return row_lo - pad, row_hi + pad


def symmetric_eig_upper(lo_mat, hi_mat):
    """Gershgorin upper bound on the largest eigenvalue of any symmetric
    matrix whose entries lie in the given interval matrix."""
    lo_mat = np.asarray(lo_mat, dtype=float)
    hi_mat = np.asarray(hi_mat, dtype=float)
    mag = np.maximum(np.abs(lo_mat), np.abs(hi_mat))
    off = mag.sum(axis=-1) - np.diagonal(mag, axis1=-2, axis2=-1)
    diag_hi = np.diagonal(hi_mat, axis1=-2, axis2=-1)
    return _up(np.max(diag_hi + off, axis=-1))
