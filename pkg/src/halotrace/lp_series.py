"""Third-order closed-form halo approximation about a collinear libration point.

The constants follow Richardson's third-order construction. The series are
written in the harmonic form

    x = x200 Ax^2 + x020 Az^2 + x101 Ax cos(wt)
        + (x202 Ax^2 + x022 Az^2) cos(2wt) + (x303 Ax^3 + x123 Ax Az^2) cos(3wt)
    y = y101 Ax sin(wt) + (y202 Ax^2 + y022 Az^2) sin(2wt)
        + (y303 Ax^3 + y123 Ax Az^2) sin(3wt)
    z = z110 Ax Az + z011 Az cos(wt) + z112 Ax Az cos(2wt)
        + (z213 Ax^2 Az + z033 Az^3) cos(3wt)

in coordinates centred on the libration point and scaled by ``gamma``; see
``SERIES_MAPPING`` for how each name maps onto the Richardson constants.
Time zero is the perpendicular x-z plane crossing where x is largest, so y is
negative on the first half period and positive on the second.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .cr3bp import Family, LagrangePoint, SystemConfig, collinear_point


class BifurcationError(ValueError):
    """Raised when Az lies below the halo bifurcation (no real Ax)."""


# name -> (Richardson expression, meaning)
SERIES_MAPPING = {
    "x200": ("a21", "Ax^2 constant offset"),
    "x020": ("a22", "Az^2 constant offset"),
    "x101": ("1", "Ax cos(wt)"),
    "x202": ("a23", "Ax^2 cos(2wt)"),
    "x022": ("-a24", "Az^2 cos(2wt)"),
    "x303": ("-a31", "Ax^3 cos(3wt)"),
    "x123": ("a32", "Ax Az^2 cos(3wt)"),
    "y101": ("-k", "Ax sin(wt)"),
    "y202": ("b21", "Ax^2 sin(2wt)"),
    "y022": ("-b22", "Az^2 sin(2wt)"),
    "y303": ("-b31", "Ax^3 sin(3wt)"),
    "y123": ("b32", "Ax Az^2 sin(3wt)"),
    "z110": ("-3 delta_n d21", "Ax Az constant offset"),
    "z011": ("-delta_n", "Az cos(wt)"),
    "z112": ("delta_n d21", "Ax Az cos(2wt)"),
    "z213": ("-delta_n d32", "Ax^2 Az cos(3wt)"),
    "z033": ("delta_n d31", "Az^3 cos(3wt)"),
}


@dataclass(frozen=True)
class LpCoefficients:
    mu: float
    lagrange_point: LagrangePoint
    family: Family
    length_unit_km: float
    x_lagrange: float
    gamma: float
    offset: float
    delta_n: int
    c2: float
    c3: float
    c4: float
    lam: float
    k: float
    delta: float
    d1: float
    d2: float
    a21: float
    a22: float
    a23: float
    a24: float
    b21: float
    b22: float
    d21: float
    a31: float
    a32: float
    b31: float
    b32: float
    d31: float
    d32: float
    s1: float
    s2: float
    a1: float
    a2: float
    l1: float
    l2: float
    x200: float
    x020: float
    x101: float
    x202: float
    x022: float
    x303: float
    x123: float
    y101: float
    y202: float
    y022: float
    y303: float
    y123: float
    z110: float
    z011: float
    z112: float
    z213: float
    z033: float

    def az_nd(self, az_km):
        return np.asarray(az_km, dtype=float) / (self.gamma * self.length_unit_km)

    def az_km(self, az_nd):
        return np.asarray(az_nd, dtype=float) * (self.gamma * self.length_unit_km)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["lagrange_point"] = self.lagrange_point.name
        d["family"] = self.family.value
        return d


@dataclass(frozen=True)
class Amplitude:
    az_km: float
    az_nd: float
    ax_nd: float


def legendre_coefficient(n: int, mu: float, x_lagrange: float, gamma: float) -> float:
    """c_n of the potential expansion about a collinear point.

    The local x axis is aligned with the rotating-frame x axis, so odd-order
    coefficients carry the side on which each primary lies.
    """
    total = 0.0
    for mass, xp in ((1.0 - mu, -mu), (mu, 1.0 - mu)):
        d = xp - x_lagrange
        total += mass * math.copysign(1.0, d) ** n * (gamma / abs(d)) ** (n + 1)
    return total / gamma**3


def build_coefficients(config: SystemConfig) -> LpCoefficients:
    point = config.lagrange_point
    if not point.collinear:
        raise ValueError(f"halo series need a collinear point, got {point.name}")
    mu = config.mu
    xl = collinear_point(mu, point)
    if point == LagrangePoint.L3:
        gamma = abs(xl + mu)
    else:
        gamma = abs(xl - (1.0 - mu))

    c2, c3, c4 = (legendre_coefficient(n, mu, xl, gamma) for n in (2, 3, 4))

    lam2 = 0.5 * (2.0 - c2 + math.sqrt(9.0 * c2 * c2 - 8.0 * c2))
    lam = math.sqrt(lam2)
    k = 2.0 * lam / (lam2 + 1.0 - c2)
    k2 = k * k
    delta = lam2 - c2

    d1 = 3.0 * lam2 / k * (k * (6.0 * lam2 - 1.0) - 2.0 * lam)
    d2 = 8.0 * lam2 / k * (k * (11.0 * lam2 - 1.0) - 2.0 * lam)

    a21 = 3.0 * c3 * (k2 - 2.0) / (4.0 * (1.0 + 2.0 * c2))
    a22 = 3.0 * c3 / (4.0 * (1.0 + 2.0 * c2))
    a23 = -3.0 * c3 * lam / (4.0 * k * d1) * (3.0 * k**3 * lam - 6.0 * k * (k - lam) + 4.0)
    a24 = -3.0 * c3 * lam / (4.0 * k * d1) * (2.0 + 3.0 * k * lam)
    b21 = -3.0 * c3 * lam / (2.0 * d1) * (3.0 * k * lam - 4.0)
    b22 = 3.0 * c3 * lam / d1
    d21 = -c3 / (2.0 * lam2)

    a31 = (-9.0 * lam / (4.0 * d2) * (4.0 * c3 * (k * a23 - b21) + k * c4 * (4.0 + k2))
           + (9.0 * lam2 + 1.0 - c2) / (2.0 * d2) * (3.0 * c3 * (2.0 * a23 - k * b21) + c4 * (2.0 + 3.0 * k2)))
    a32 = -1.0 / d2 * (9.0 * lam / 4.0 * (4.0 * c3 * (k * a24 - b22) + k * c4)
                       + 1.5 * (9.0 * lam2 + 1.0 - c2) * (c3 * (k * b22 + d21 - 2.0 * a24) - c4))
    b31 = 3.0 / (8.0 * d2) * (8.0 * lam * (3.0 * c3 * (k * b21 - 2.0 * a23) - c4 * (2.0 + 3.0 * k2))
                             + (9.0 * lam2 + 1.0 + 2.0 * c2) * (4.0 * c3 * (k * a23 - b21) + k * c4 * (4.0 + k2)))
    b32 = 1.0 / d2 * (9.0 * lam * (c3 * (k * b22 + d21 - 2.0 * a24) - c4)
                      + 3.0 / 8.0 * (9.0 * lam2 + 1.0 + 2.0 * c2) * (4.0 * c3 * (k * a24 - b22) + k * c4))
    d31 = 3.0 / (64.0 * lam2) * (4.0 * c3 * a24 + c4)
    d32 = 3.0 / (64.0 * lam2) * (4.0 * c3 * (a23 - d21) + c4 * (4.0 + k2))

    inv = 1.0 / (2.0 * lam * (lam * (1.0 + k2) - 2.0 * k))
    s1 = inv * (1.5 * c3 * (2.0 * a21 * (k2 - 2.0) - a23 * (k2 + 2.0) - 2.0 * k * b21)
                - 3.0 / 8.0 * c4 * (3.0 * k2 * k2 - 8.0 * k2 + 8.0))
    s2 = inv * (1.5 * c3 * (2.0 * a22 * (k2 - 2.0) + a24 * (k2 + 2.0) + 2.0 * k * b22 + 5.0 * d21)
                + 3.0 / 8.0 * c4 * (12.0 - k2))
    a1 = -1.5 * c3 * (2.0 * a21 + a23 + 5.0 * d21) - 3.0 / 8.0 * c4 * (12.0 - k2)
    a2 = 1.5 * c3 * (a24 - 2.0 * a22) + 9.0 / 8.0 * c4
    l1 = a1 + 2.0 * lam2 * s1
    l2 = a2 + 2.0 * lam2 * s2

    # Northern: the larger z excursion is positive (sign set by the d21 asymmetry).
    northern = 1 if d21 < 0.0 else -1
    dn = northern if config.family == Family.NORTHERN else -northern

    return LpCoefficients(
        mu=mu, lagrange_point=point, family=config.family,
        length_unit_km=config.length_unit_km, x_lagrange=xl, gamma=gamma,
        offset=xl, delta_n=dn, c2=c2, c3=c3, c4=c4, lam=lam, k=k, delta=delta,
        d1=d1, d2=d2, a21=a21, a22=a22, a23=a23, a24=a24, b21=b21, b22=b22,
        d21=d21, a31=a31, a32=a32, b31=b31, b32=b32, d31=d31, d32=d32,
        s1=s1, s2=s2, a1=a1, a2=a2, l1=l1, l2=l2,
        x200=a21, x020=a22, x101=1.0, x202=a23, x022=-a24, x303=-a31, x123=a32,
        y101=-k, y202=b21, y022=-b22, y303=-b31, y123=b32,
        z110=-3.0 * dn * d21, z011=-float(dn), z112=dn * d21,
        z213=-dn * d32, z033=dn * d31,
    )


def ax_squared(az_nd, coeffs: LpCoefficients):
    """Ax^2 from l1 Ax^2 + l2 Az^2 + delta = 0; negative below the bifurcation."""
    az = np.asarray(az_nd, dtype=float)
    return -(coeffs.l2 * az * az + coeffs.delta) / coeffs.l1


def amplitude_constraint(az_nd, coeffs: LpCoefficients):
    ax2 = ax_squared(az_nd, coeffs)
    if np.any(ax2 < 0.0):
        raise BifurcationError("Az is below the halo bifurcation amplitude; Ax is not real")
    ax = np.sqrt(ax2)
    return float(ax) if np.ndim(ax) == 0 else ax


def amplitude(az_km: float, coeffs: LpCoefficients) -> Amplitude:
    az_nd = float(coeffs.az_nd(az_km))
    if az_nd < 0.0:
        raise ValueError("Az must be non-negative")
    return Amplitude(az_km=float(az_km), az_nd=az_nd, ax_nd=amplitude_constraint(az_nd, coeffs))


def frequency(az_nd, coeffs: LpCoefficients, ax_nd=None):
    """Corrected frequency w = lambda (1 + s1 Ax^2 + s2 Az^2)."""
    az = np.asarray(az_nd, dtype=float)
    ax2 = ax_squared(az, coeffs) if ax_nd is None else np.asarray(ax_nd, dtype=float) ** 2
    return coeffs.lam * (1.0 + coeffs.s1 * ax2 + coeffs.s2 * az * az)


def lp_period(az_nd, coeffs: LpCoefficients):
    w = frequency(az_nd, coeffs, amplitude_constraint(az_nd, coeffs))
    return 2.0 * np.pi / w


def harmonics(ax, az, coeffs: LpCoefficients):
    """Harmonic amplitudes ``(X, Y, Z)``, each of shape (..., 4), in local units.

    ``x_loc = sum_k X[k] cos(k w t)``, ``y_loc = sum_k Y[k] sin(k w t)`` and
    likewise ``z_loc`` with cosines.
    """
    c = coeffs
    ax = np.asarray(ax, dtype=float)
    az = np.asarray(az, dtype=float)
    ax, az = np.broadcast_arrays(ax, az)
    ax2, az2 = ax * ax, az * az
    zero = np.zeros_like(ax)
    X = np.stack([
        c.x200 * ax2 + c.x020 * az2,
        c.x101 * ax,
        c.x202 * ax2 + c.x022 * az2,
        c.x303 * ax2 * ax + c.x123 * ax * az2,
    ], axis=-1)
    Y = np.stack([
        zero,
        c.y101 * ax,
        c.y202 * ax2 + c.y022 * az2,
        c.y303 * ax2 * ax + c.y123 * ax * az2,
    ], axis=-1)
    Z = np.stack([
        c.z110 * ax * az,
        c.z011 * az,
        c.z112 * ax * az,
        c.z213 * ax2 * az + c.z033 * az2 * az,
    ], axis=-1)
    return X, Y, Z


_K = np.arange(4.0)


def _local(theta, ax, az, coeffs, derivative=0):
    X, Y, Z = harmonics(ax, az, coeffs)
    kth = np.asarray(theta, dtype=float)[..., None] * _K
    cos_k, sin_k = np.cos(kth), np.sin(kth)
    if derivative == 0:
        return (np.sum(X * cos_k, -1), np.sum(Y * sin_k, -1), np.sum(Z * cos_k, -1))
    # first derivative with respect to theta
    return (-np.sum(X * _K * sin_k, -1), np.sum(Y * _K * cos_k, -1), -np.sum(Z * _K * sin_k, -1))


def eval_lp(t, az_nd, coeffs: LpCoefficients) -> np.ndarray:
    """Barycentric normalized position at time ``t`` on the halo of amplitude ``az_nd``.

    ``t`` and ``az_nd`` broadcast against each other; the result has a
    trailing axis of length 3.
    """
    ax = amplitude_constraint(az_nd, coeffs)
    w = frequency(az_nd, coeffs, ax)
    xl, yl, zl = _local(w * np.asarray(t, dtype=float), ax, az_nd, coeffs)
    g = coeffs.gamma
    return np.stack(np.broadcast_arrays(coeffs.offset + g * xl, g * yl, g * zl), axis=-1)


def eval_lp_state(t, az_nd, coeffs: LpCoefficients) -> np.ndarray:
    """Position and velocity (analytic time derivative of the series)."""
    ax = amplitude_constraint(az_nd, coeffs)
    w = frequency(az_nd, coeffs, ax)
    theta = w * np.asarray(t, dtype=float)
    g = coeffs.gamma
    xl, yl, zl = _local(theta, ax, az_nd, coeffs)
    dx, dy, dz = _local(theta, ax, az_nd, coeffs, derivative=1)
    parts = np.broadcast_arrays(coeffs.offset + g * xl, g * yl, g * zl,
                                g * w * dx, g * w * dy, g * w * dz)
    return np.stack(parts, axis=-1)


def coefficient_dump(coeffs: LpCoefficients) -> str:
    """``key=value`` lines, full precision, in field order."""
    lines = []
    for key, value in coeffs.as_dict().items():
        lines.append(f"{key}={value!r}" if isinstance(value, float) else f"{key}={value}")
    return "\n".join(lines) + "\n"
