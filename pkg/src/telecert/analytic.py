"""Quadrature and closed-form oracles for the headline numbers.

The oracles themselves avoid the protocol and kernel code paths so that they
can serve as independent ground truth; only the cross-checks in
``lambda_threshold`` and ``verify_all`` call into the protocols.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from .certify import ChshSettings, average_fidelity, chsh
from .protocols import Ideal, PCrit

SQRT2 = math.sqrt(2.0)
INV_SQRT2 = 1.0 / SQRT2
BRANCHES = ("continuous", "principal", "truncated")


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    abs_error_estimate: float
    evaluations: int

    def __post_init__(self) -> None:
        if self.abs_error_estimate < 0:
            raise ValueError("error estimate must be non-negative")


@dataclass(frozen=True)
class McResult:
    value: float
    std_error: float
    count: int


# Gisin sector fidelity -------------------------------------------------------


def gisin_u(phi, branch: str = "continuous"):
    """Polar angle of the sector boundary, u = arctan(sqrt(2) / cos(phi + pi/3)).

    ``continuous`` keeps u in (0, pi) by moving to the upper branch when the
    cosine is negative. ``principal`` is the bare arctangent; the integrand
    only sees sin^2 u, so both give the same fidelity. ``truncated`` clamps
    negative principal values to zero, which is wrong and exists to check
    that the verification notices.
    """
    c = np.cos(np.asarray(phi, dtype=float) + math.pi / 3.0)
    if branch == "continuous":
        u = np.arctan2(SQRT2, c)
    elif branch == "principal":
        with np.errstate(divide="ignore"):
            u = np.arctan(SQRT2 / c)
    elif branch == "truncated":
        with np.errstate(divide="ignore"):
            u = np.maximum(np.arctan(SQRT2 / c), 0.0)
    else:
        raise ValueError(f"unknown branch {branch!r} (choose from {', '.join(BRANCHES)})")
    return float(u) if np.ndim(u) == 0 else u


def gisin_fidelity_quadrature(tol: float = 1e-8, branch: str = "continuous", inner: str = "closed") -> QuadratureResult:
    """F = 1/2 [1 + (3/pi) int_{pi/3}^{pi} dphi int_0^{u(phi)} cos(t) sin(t) dt].

    The inner integral is 1/2 sin^2 u in closed form (``inner="closed"``);
    ``inner="numeric"`` integrates it as well.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    scale = 1.5 / math.pi  # (1/2)(3/pi)
    if inner == "closed":
        def f(phi):
            return 0.5 * math.sin(gisin_u(phi, branch)) ** 2

        val, err, info = integrate.quad(f, math.pi / 3.0, math.pi, epsabs=tol / scale, epsrel=0.0, full_output=True)
        evals = int(info["neval"])
    elif inner == "numeric":
        def theta_upper(phi):
            return gisin_u(phi, branch)

        val, err = integrate.dblquad(
            lambda t, phi: math.cos(t) * math.sin(t),
            math.pi / 3.0,
            math.pi,
            0.0,
            theta_upper,
            epsabs=tol / scale,
            epsrel=0.0,
        )
        evals = -1
    else:
        raise ValueError(f"unknown inner rule {inner!r}")
    return QuadratureResult(0.5 + scale * val, scale * abs(err), max(evals, 0))


def gisin_sector_fidelity_mc(n: int = 10_000_000, seed: int = 0, chunk: int = 1_000_000) -> McResult:
    """Monte Carlo of the single-sector average of (1 + t00.a)/2 over S00.

    By symmetry this equals the sphere average of (1 + t_s(a).a)/2 with s(a)
    the nearest tetrahedron vertex, which is what is sampled here.
    """
    rng = np.random.default_rng(seed)
    tetra = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]]) / math.sqrt(3.0)
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < n:
        m = min(chunk, n - done)
        z = rng.uniform(-1.0, 1.0, m)
        phi = rng.uniform(0.0, 2.0 * math.pi, m)
        r = np.sqrt(1.0 - z * z)
        a = np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
        f = 0.5 * (1.0 + np.max(a @ tetra.T, axis=1))
        total += f.sum()
        total_sq += (f * f).sum()
        done += m
    mean = float(total / n)
    var = max(total_sq / n - mean * mean, 0.0) * n / (n - 1)
    return McResult(mean, math.sqrt(var / n), n)


# capped protocol ---------------------------------------------------------------


def cap_fraction() -> float:
    """Share of the sphere covered by the six caps |a_k| > 1/sqrt(2)."""
    return 3.0 * (1.0 - INV_SQRT2)


def pcrit_cap_fidelity() -> float:
    """Closed form 1/2 [1 + pi / (8 (sqrt(2) - 1))]."""
    return 0.5 * (1.0 + math.pi / (8.0 * (SQRT2 - 1.0)))


def pcrit_cap_fidelity_quadrature(tol: float = 1e-10) -> QuadratureResult:
    """Cap average of (1 + a_B.a)/2 from the defining ratio of integrals.

    a_B = (cos phi, sin phi, 1)/sqrt(2) and the cap is theta < pi/4.
    """
    area = 2.0 * math.pi * (1.0 - INV_SQRT2)

    def overlap(theta, phi):
        ab = np.array([math.cos(phi), math.sin(phi), 1.0]) * INV_SQRT2
        a = np.array([math.sin(theta) * math.cos(phi), math.sin(theta) * math.sin(phi), math.cos(theta)])
        return float(ab @ a) * math.sin(theta)

    val, err = integrate.dblquad(overlap, 0.0, 2.0 * math.pi, 0.0, math.pi / 4.0, epsabs=tol * area, epsrel=0.0)
    return QuadratureResult(0.5 * (1.0 + val / area), 0.5 * abs(err) / area, 0)


def pcrit_cap_fidelity_mc(n: int = 10_000_000, seed: int = 0, chunk: int = 1_000_000) -> McResult:
    """Rejection-sampled cap oracle: uniform points with z > 1/sqrt(2)."""
    rng = np.random.default_rng(seed)
    total = 0.0
    total_sq = 0.0
    kept = 0
    while kept < n:
        m = chunk
        z = rng.uniform(-1.0, 1.0, m)
        phi = rng.uniform(0.0, 2.0 * math.pi, m)
        keep = z > INV_SQRT2
        z, phi = z[keep][: n - kept], phi[keep][: n - kept]
        st = np.sqrt(1.0 - z * z)
        f = 0.5 * (1.0 + INV_SQRT2 * (st + z))
        total += f.sum()
        total_sq += (f * f).sum()
        kept += z.size
    mean = float(total / n)
    var = max(total_sq / n - mean * mean, 0.0) * n / (n - 1)
    return McResult(mean, math.sqrt(var / n), n)


def pcrit_total_fidelity() -> float:
    """Caps use the cap fidelity, everything else is teleported perfectly."""
    frac = cap_fraction()
    return frac * pcrit_cap_fidelity() + (1.0 - frac)


# lambda threshold --------------------------------------------------------------


@dataclass(frozen=True)
class LambdaThreshold:
    lam: float
    fidelity: float
    bisected: float

    def __iter__(self):
        return iter((self.lam, self.fidelity))


def lambda_threshold(xtol: float = 1e-13) -> LambdaThreshold:
    """(1/sqrt(2), (1 + 1/sqrt(2))/2), with the root of |CHSH(lambda)| = 2 found by bisection."""
    canon = ChshSettings.canonical()
    root = optimize.bisect(lambda lam: abs(chsh(Ideal(lam), canon).value) - 2.0, 0.0, 1.0, xtol=xtol)
    return LambdaThreshold(INV_SQRT2, 0.5 * (1.0 + INV_SQRT2), float(root))


# verification ------------------------------------------------------------------


@dataclass(frozen=True)
class Target:
    name: str
    expected: float
    value: float
    tolerance: float
    detail: str = ""

    @property
    def passed(self) -> bool:
        return bool(abs(self.value - self.expected) <= self.tolerance)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "expected": self.expected,
            "value": self.value,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "detail": self.detail,
        }


def verify_all(
    tol: float = 1e-8,
    n_samples: int = 1_000_000,
    seed: int = 0,
    gisin_branch: str = "continuous",
) -> list[Target]:
    """All analytic targets with their Monte Carlo cross-checks.

    ``tol`` is the quadrature tolerance and the agreement required between a
    closed form and its defining integral. Monte Carlo comparisons use five
    standard errors.
    """
    out = []
    g = gisin_fidelity_quadrature(tol, branch=gisin_branch)
    out.append(Target("gisin_fidelity", 0.87, g.value, 0.005, f"quadrature, branch={gisin_branch}"))
    mc = gisin_sector_fidelity_mc(n_samples, seed)
    out.append(Target("gisin_fidelity_mc_agreement", g.value, mc.value, 5.0 * mc.std_error + g.abs_error_estimate, "sector Monte Carlo"))

    cap = pcrit_cap_fidelity()
    out.append(Target("pcrit_cap_fidelity", 0.97403, cap, 5e-6, "closed form"))
    q = pcrit_cap_fidelity_quadrature(min(tol, 1e-10))
    out.append(Target("pcrit_cap_quadrature_agreement", cap, q.value, max(tol, 1e-12), "defining integral"))
    cmc = pcrit_cap_fidelity_mc(n_samples, seed)
    out.append(Target("pcrit_cap_mc_agreement", cap, cmc.value, 5.0 * cmc.std_error, "cap Monte Carlo"))

    total = pcrit_total_fidelity()
    out.append(Target("pcrit_total_fidelity", 0.97718, total, 5e-5, "combination formula"))
    out.append(Target("cap_fraction", 0.87868, cap_fraction(), 5e-6, "six caps over the sphere"))
    pmc = average_fidelity(PCrit(INV_SQRT2), n_samples, seed)
    out.append(Target("pcrit_total_mc_agreement", total, pmc.value, 5.0 * pmc.std_error, "protocol Monte Carlo"))

    lt = lambda_threshold()
    out.append(Target("lambda_crit", 0.70711, lt.lam, 5e-6, "closed form"))
    out.append(Target("lambda_crit_bisection", lt.lam, lt.bisected, max(tol, 1e-9), "bisection on CHSH = 2"))
    out.append(Target("fidelity_crit", 0.85355, lt.fidelity, 5e-6, "(1 + lambda_crit)/2"))
    return out
