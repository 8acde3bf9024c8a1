"""Closed-form real roots of batches of cubics a c^3 + b c^2 + c1 c + d = 0."""

from __future__ import annotations

import numpy as np


def _polish(roots, a, b, c, d, steps=2):
    for _ in range(steps):
        p = ((a * roots + b) * roots + c) * roots + d
        dp = (3.0 * a * roots + 2.0 * b) * roots + c
        ok = np.isfinite(roots) & (np.abs(dp) > 0.0)
        step = np.where(ok, p / np.where(ok, dp, 1.0), 0.0)
        # a Newton step larger than the root spacing means a near-double root; keep the closed form
        roots = np.where(np.abs(step) < 1e-6 * (1.0 + np.abs(roots)), roots - step, roots)
    return roots


def real_cubic_roots(a, b, c, d) -> np.ndarray:
    """Real roots of ``a x^3 + b x^2 + c x + d`` row by row.

    Returns an array of shape (n, 3) sorted ascending with NaN padding for
    missing real roots. Rows whose leading coefficient vanishes fall back to
    the quadratic (or linear) formula. Three-root cases use the
    trigonometric form, single-root cases Cardano's formula; every root gets
    two Newton polishing steps on the original polynomial.
    """
    a, b, c, d = (np.atleast_1d(np.asarray(v, dtype=float)) for v in (a, b, c, d))
    a, b, c, d = np.broadcast_arrays(a, b, c, d)
    n = a.shape[0]
    out = np.full((n, 3), np.nan)

    scale = np.maximum.reduce([np.abs(a), np.abs(b), np.abs(c), np.abs(d)])
    cubic = np.abs(a) > 1e-14 * scale
    if np.any(cubic):
        aa, bb, cc, dd = a[cubic], b[cubic], c[cubic], d[cubic]
        p2, p1, p0 = bb / aa, cc / aa, dd / aa
        P = p1 - p2 * p2 / 3.0
        Q = 2.0 * p2**3 / 27.0 - p2 * p1 / 3.0 + p0
        disc = (Q / 2.0) ** 2 + (P / 3.0) ** 3
        shift = -p2 / 3.0
        roots = np.full((aa.shape[0], 3), np.nan)

        # a discriminant within roundoff of zero is a repeated root; the trigonometric form keeps both
        one = disc > 1e-12 * np.maximum((Q / 2.0) ** 2, np.abs(P / 3.0) ** 3)
        if np.any(one):
            sq = np.sqrt(disc[one])
            u = np.cbrt(-Q[one] / 2.0 + sq) + np.cbrt(-Q[one] / 2.0 - sq)
            roots[one, 0] = u + shift[one]

        three = ~one
        if np.any(three):
            Pm = P[three]
            m = 2.0 * np.sqrt(np.maximum(-Pm / 3.0, 0.0))
            den = Pm * m  # underflows to zero for a (near) triple root
            with np.errstate(divide="ignore", invalid="ignore"):
                arg = np.where(den != 0.0, 3.0 * Q[three] / den, 0.0)
            phi = np.arccos(np.clip(arg, -1.0, 1.0)) / 3.0
            for j in range(3):
                roots[three, j] = m * np.cos(phi - 2.0 * np.pi * j / 3.0) + shift[three]

        roots = _polish(roots, aa[:, None], bb[:, None], cc[:, None], dd[:, None])
        out[cubic] = np.sort(roots, axis=1)

    quad = ~cubic & (np.abs(b) > 1e-14 * scale)
    if np.any(quad):
        bb, cc, dd = b[quad], c[quad], d[quad]
        disc = cc * cc - 4.0 * bb * dd
        roots = np.full((bb.shape[0], 3), np.nan)
        ok = disc >= 0.0
        sq = np.sqrt(np.where(ok, disc, 0.0))
        # numerically stable pair
        qq = -0.5 * (cc + np.copysign(sq, cc))
        with np.errstate(divide="ignore", invalid="ignore"):
            r1 = np.where(qq != 0.0, qq / bb, 0.0)
            r2 = np.where(qq != 0.0, dd / qq, 0.0)
        roots[ok, 0] = r1[ok]
        roots[ok, 1] = r2[ok]
        out[quad] = np.sort(roots, axis=1)

    lin = ~cubic & ~quad & (np.abs(c) > 1e-14 * scale)
    if np.any(lin):
        out[lin, 0] = -d[lin] / c[lin]
    return out
