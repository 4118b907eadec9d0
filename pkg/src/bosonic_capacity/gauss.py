"""Thermal entropy function, its inverse and single-mode Gaussian moments."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.optimize

from .errors import DomainError, ModeCountError
from .fockcore import DensityMatrix, von_neumann_entropy

VACUUM_VARIANCE = 0.5


def g_function(N):
    """Entropy in nats of a thermal state with mean photon number ``N``.

    ``g(N) = (N+1) ln(N+1) - N ln N`` with ``g(0) = 0``.  Evaluated as
    ``log1p(N) + N ln(1 + 1/N)``, with the last logarithm taken as
    ``log1p(1/N)`` for ``N >= 1`` and ``log1p(N) - ln N`` below, which keeps
    full accuracy from subnormal to huge N.  Accepts scalars or arrays.
    """
    arr = np.asarray(N, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise DomainError(f"g is defined for N >= 0, got {N}")
    safe = np.where(arr > 0, arr, 1.0)
    with np.errstate(over="ignore"):
        # np.where evaluates both branches; each is only used where accurate
        tail = np.where(safe >= 1.0, np.log1p(1.0 / safe), np.log1p(safe) - np.log(safe))
    val = np.where(arr > 0, np.log1p(arr) + arr * tail, 0.0)
    if np.ndim(N) == 0:
        return float(val)
    return val


def g_derivative(N: float) -> float:
    """``g'(N) = ln(1 + 1/N)``."""
    if N <= 0:
        raise DomainError(f"g' is defined for N > 0, got {N}")
    return math.log1p(1.0 / N)


def g_inverse(s: float) -> float:
    """Mean photon number of the thermal state with entropy ``s`` nats."""
    if s < 0 or math.isnan(s):
        raise DomainError(f"g^-1 is defined for s >= 0, got {s}")
    if s == 0:
        return 0.0
    # g(N) >= ln(N + 1) puts the root below e^s
    hi = math.expm1(s)
    return scipy.optimize.brentq(
        lambda n: g_function(n) - s, 0.0, hi, xtol=1e-300, rtol=1e-15, maxiter=200
    )


@dataclass(frozen=True, eq=False)
class GaussianMoments:
    """First moments (<Q>, <P>) and symmetrized covariance of one mode."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(2)
        cov = np.asarray(self.cov, dtype=float).reshape(2, 2)
        if not np.allclose(cov, cov.T, atol=1e-12):
            raise DomainError("covariance matrix must be symmetric")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", 0.5 * (cov + cov.T))

    @property
    def symplectic_eigenvalue(self) -> float:
        return math.sqrt(max(np.linalg.det(self.cov), 0.0))

    @property
    def mean_photon(self) -> float:
        """``<a^dag a> = (<Q^2> + <P^2> - 1) / 2``."""
        return 0.5 * (np.trace(self.cov) + self.mean @ self.mean - 1.0)

    @classmethod
    def vacuum(cls) -> "GaussianMoments":
        return cls(np.zeros(2), VACUUM_VARIANCE * np.eye(2))

    @classmethod
    def thermal(cls, N: float) -> "GaussianMoments":
        return cls(np.zeros(2), (N + 0.5) * np.eye(2))


def extract_moments(rho: DensityMatrix) -> GaussianMoments:
    """Moments of the Gaussian state with the same first and second moments.

    Uses ``<a>``, ``<a^2>`` and ``<a^dag a>`` read from the matrix elements,
    which are exact for a state supported on the truncated space.
    """
    if rho.modes != 1:
        raise ModeCountError("moment extraction is defined for single-mode states")
    r = rho.data
    d = rho.dim
    n = np.arange(d)
    # <a> = sum_n sqrt(n) rho[n, n-1]; <a^2> = sum_n sqrt(n (n-1)) rho[n, n-2]
    a1 = np.sum(np.sqrt(n[1:]) * np.diagonal(r, -1)) if d > 1 else 0j
    a2 = np.sum(np.sqrt(n[2:] * (n[2:] - 1.0)) * np.diagonal(r, -2)) if d > 2 else 0j
    nbar = float(np.real(np.diag(r)) @ n)
    mq = math.sqrt(2.0) * a1.real
    mp = math.sqrt(2.0) * a1.imag
    qq = nbar + 0.5 + a2.real
    pp = nbar + 0.5 - a2.real
    qp = a2.imag
    cov = np.array([[qq - mq * mq, qp - mq * mp], [qp - mq * mp, pp - mp * mp]])
    return GaussianMoments(np.array([mq, mp]), cov)


def gaussified_entropy(m: GaussianMoments) -> float:
    """Entropy ``g(nu - 1/2)`` of the Gaussian state with moments ``m``."""
    nu = m.symplectic_eigenvalue
    if nu < 0.5 - 1e-10:
        raise DomainError(f"unphysical moments: symplectic eigenvalue {nu:.6g} < 1/2")
    return g_function(max(nu - 0.5, 0.0))


def entropy_photon_number(rho: DensityMatrix) -> float:
    """Thermal photon number with the same entropy as ``rho``."""
    return g_inverse(von_neumann_entropy(rho))
