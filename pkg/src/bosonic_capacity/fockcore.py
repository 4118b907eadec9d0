"""Truncated Fock-space states, operators and beamsplitter machinery.

Single-mode states live on span{|0>, ..., |D-1>}; two-mode states on the
tensor product with the same cutoff D per mode (mode 1 is the system, mode 2
the environment).  Conventions: hbar = 1, vacuum quadrature variance 1/2,
entropies in nats.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Optional

import numpy as np
import scipy.linalg
import scipy.optimize
import scipy.special
import scipy.stats

from .errors import (
    DomainError,
    InvalidStateError,
    ModeCountError,
    NumericalError,
    TruncationError,
)

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-10
NEGATIVITY_TOL = 1e-10
EIGEN_CLIP = 1e-14
THERMAL_TAIL_WARN = 1e-10


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """A validated density matrix in the number basis.

    Attributes:
        data: ``D x D`` (one mode) or ``D^2 x D^2`` (two modes) complex array.
        modes: 1 or 2.
        tail_mass: population the generating family puts beyond the cutoff
            (0 for states that are exactly supported on the truncated space).
        warning: optional note attached at construction, e.g. a large tail.
    """

    data: np.ndarray
    modes: int = 1
    tail_mass: float = 0.0
    warning: Optional[str] = field(default=None, compare=False)

    def __post_init__(self):
        data = np.array(self.data, dtype=complex)
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        if self.modes not in (1, 2):
            raise ModeCountError(f"modes must be 1 or 2, got {self.modes}")
        if data.ndim != 2 or data.shape[0] != data.shape[1] or data.shape[0] == 0:
            raise InvalidStateError(f"expected a non-empty square matrix, got shape {data.shape}")
        d = round(data.shape[0] ** (1.0 / self.modes))
        if d**self.modes != data.shape[0]:
            raise InvalidStateError(f"size {data.shape[0]} is not a {self.modes}-mode Fock space")
        herm = np.max(np.abs(data - data.conj().T))
        if herm > HERMITIAN_TOL:
            raise InvalidStateError(f"matrix is not Hermitian (max deviation {herm:.3e})")
        tr = np.trace(data).real
        if abs(tr - 1.0) > TRACE_TOL:
            raise InvalidStateError(f"trace {tr!r} differs from 1")
        lo = self.eigenvalues[0]
        if lo < -NEGATIVITY_TOL:
            raise InvalidStateError(f"minimum eigenvalue {lo:.3e} is negative")

    @property
    def dim(self) -> int:
        """Per-mode Fock cutoff D."""
        return round(self.data.shape[0] ** (1.0 / self.modes))

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        try:
            return np.linalg.eigvalsh(self.data)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"eigendecomposition failed: {exc}") from exc

    def populations(self) -> np.ndarray:
        return np.real(np.diag(self.data)).copy()

    def padded(self, dim: int) -> "DensityMatrix":
        """Embed a single-mode state into a larger cutoff."""
        if self.modes != 1:
            raise ModeCountError("padding is only defined for single-mode states")
        if dim < self.dim:
            raise DomainError(f"cannot pad dimension {self.dim} down to {dim}")
        out = np.zeros((dim, dim), dtype=complex)
        out[: self.dim, : self.dim] = self.data
        return DensityMatrix(out, tail_mass=self.tail_mass, warning=self.warning)

    def to_dict(self) -> dict:
        flat = self.data.reshape(-1)
        return {
            "dim": self.dim,
            "modes": self.modes,
            "re": flat.real.tolist(),
            "im": flat.imag.tolist(),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "DensityMatrix":
        modes = int(obj.get("modes", 1))
        dim = int(obj["dim"])
        size = dim**modes
        re = np.asarray(obj["re"], dtype=float)
        im = np.asarray(obj.get("im", np.zeros_like(re)), dtype=float)
        if re.size != size * size or im.size != size * size:
            raise InvalidStateError(f"expected {size * size} entries for dim={dim}, modes={modes}")
        return cls((re + 1j * im).reshape(size, size), modes=modes)


def _hermitize(mat: np.ndarray) -> np.ndarray:
    return 0.5 * (mat + mat.conj().T)


def _from_vector(psi: np.ndarray, tail_mass: float = 0.0) -> DensityMatrix:
    psi = np.asarray(psi, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    return DensityMatrix(_hermitize(np.outer(psi, psi.conj())), tail_mass=tail_mass)


def make_number_state(n: int, dim: int) -> DensityMatrix:
    """Projector onto the number state ``|n>``."""
    if not 0 <= n < dim:
        raise DomainError(f"photon number {n} is out of range for dim={dim}")
    psi = np.zeros(dim)
    psi[n] = 1.0
    return _from_vector(psi)


def make_pure_state(amplitudes) -> DensityMatrix:
    """Pure state with (unnormalized) number-basis amplitudes."""
    amps = np.asarray(amplitudes, dtype=complex)
    if amps.ndim != 1 or amps.size == 0 or not np.any(amps):
        raise DomainError("need a non-zero amplitude vector")
    return _from_vector(amps)


def coherent_tail_mass(alpha: complex, dim: int) -> float:
    """Poisson mass of ``|alpha>`` beyond the cutoff."""
    return float(scipy.stats.poisson.sf(dim - 1, abs(alpha) ** 2))


def _check_amplitude(alpha: complex, dim: int) -> None:
    if abs(alpha) ** 2 > dim / 4:
        raise TruncationError(f"|alpha|^2 = {abs(alpha) ** 2:.4g} exceeds dim/4 = {dim / 4:.4g}")


def coherent_amplitudes(alpha: complex, dim: int) -> np.ndarray:
    """Untruncated-normalization amplitudes exp(-|a|^2/2) a^n / sqrt(n!)."""
    n = np.arange(1, dim)
    ratios = np.concatenate(([1.0], alpha / np.sqrt(n)))
    return math.exp(-abs(alpha) ** 2 / 2) * np.cumprod(ratios)


def make_coherent_state(alpha: complex, dim: int) -> DensityMatrix:
    """Coherent state ``|alpha>``, truncated and renormalized."""
    _check_amplitude(alpha, dim)
    return _from_vector(coherent_amplitudes(alpha, dim), tail_mass=coherent_tail_mass(alpha, dim))


def make_thermal_state(N: float, dim: int) -> DensityMatrix:
    """Gaussian thermal state with mean photon number N.

    The geometric weights are truncated at ``dim`` and renormalized.  If the
    discarded tail exceeds 1e-10 a warning is issued and attached.
    """
    if N < 0:
        raise DomainError(f"mean photon number must be non-negative, got {N}")
    if N == 0:
        return make_number_state(0, dim)
    q = N / (N + 1.0)
    weights = q ** np.arange(dim) / (N + 1.0)
    tail = q**dim
    note = None
    if tail > THERMAL_TAIL_WARN:
        note = f"thermal N={N} has tail mass {tail:.3e} beyond dim={dim}"
        warnings.warn(note, RuntimeWarning, stacklevel=2)
    return DensityMatrix(np.diag(weights / weights.sum()), tail_mass=tail, warning=note)


def thermal_dim(N: float, tail: float = 1e-12, minimum: int = 1) -> int:
    """Smallest cutoff whose thermal tail mass is below ``tail``."""
    if N <= 0:
        return max(1, minimum)
    q = N / (N + 1.0)
    return max(minimum, math.ceil(math.log(tail) / math.log(q)))


def annihilation(dim: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), k=1)


def displacement_operator(alpha: complex, dim: int) -> np.ndarray:
    """Unitary ``exp(alpha a^dag - conj(alpha) a)`` on the truncated space."""
    _check_amplitude(alpha, dim)
    a = annihilation(dim)
    u = scipy.linalg.expm(alpha * a.T - np.conj(alpha) * a)
    drift = np.max(np.abs(u.conj().T @ u - np.eye(dim)))
    if drift > 1e-10:
        # polar factor is the closest unitary
        w, _, vh = np.linalg.svd(u)
        u = w @ vh
    return u


def displacement_matrix_elements(alphas, rows: int, cols: int) -> np.ndarray:
    """Exact ``<m|D(alpha)|n>`` for ``m < rows``, ``n < cols``.

    These are the infinite-dimensional matrix elements, not those of a
    truncated exponential.  Along each diagonal ``m - n = const`` the element
    is a scaled associated Laguerre polynomial ``L_k^{(a)}(|alpha|^2)`` with
    ``k = min(m, n)``, generated by its three-term recurrence in ``k``, which
    stays accurate for large ``|alpha|`` (unlike stepping across columns).
    ``alphas`` may be an array; the result then has shape
    ``alphas.shape + (rows, cols)``.
    """
    alphas = np.asarray(alphas, dtype=complex)
    shape = alphas.shape
    al = alphas.reshape(-1)
    out = np.zeros((al.size, rows, cols), dtype=complex)
    x = np.abs(al) ** 2
    mag = np.sqrt(x)
    u = np.where(mag > 0, al / np.where(mag > 0, mag, 1.0), 1.0)
    a = np.arange(max(rows, cols))[:, None]
    u_pow = u[None, :] ** a
    v_pow = (-np.conj(u))[None, :] ** a
    with np.errstate(divide="ignore", invalid="ignore"):
        log_f0 = 0.5 * a * np.log(x)[None, :] - 0.5 * x[None, :] - 0.5 * scipy.special.gammaln(a + 1)
    f_prev = np.zeros_like(log_f0)
    f = np.where(a == 0, np.exp(-0.5 * x)[None, :], np.exp(log_f0))
    for k in range(min(rows, cols)):
        out[:, k:, k] = (u_pow[: rows - k] * f[: rows - k]).T
        out[:, k, k + 1 :] = (v_pow[1 : cols - k] * f[1 : cols - k]).T
        f, f_prev = ((2 * k + 1 + a - x[None, :]) * f - np.sqrt(k * (k + a)) * f_prev) / np.sqrt(
            (k + 1) * (k + 1 + a)
        ), f
    return out.reshape(shape + (rows, cols))


def _bs_angle(lam: float) -> float:
    if not 0.0 <= lam <= 1.0:
        raise DomainError(f"transmissivity must lie in [0, 1], got {lam}")
    return math.acos(math.sqrt(lam))


def _sector_generator(n: int, theta: float) -> np.ndarray:
    """theta (a^dag b - a b^dag) on span{|k, n-k>}, indexed by k."""
    k = np.arange(n)
    off = theta * np.sqrt((k + 1.0) * (n - k))
    return np.diag(off, -1) - np.diag(off, 1)


@lru_cache(maxsize=32)
def _sector_table(lam: float, nmax: int) -> np.ndarray:
    theta = _bs_angle(lam)
    table = np.zeros((nmax + 1, nmax + 1, nmax + 1))
    for n in range(nmax + 1):
        table[n, : n + 1, : n + 1] = scipy.linalg.expm(_sector_generator(n, theta))
    table.setflags(write=False)
    return table


def beamsplitter_sector_table(lam: float, nmax: int) -> np.ndarray:
    """Complete-sector beamsplitter amplitudes.

    ``table[n, m, j] = <m, n-m| U |j, n-j>`` for every total photon number
    ``n <= nmax``.  Each sector is finite, so these amplitudes are exact.
    """
    return _sector_table(float(lam), int(nmax))


def beamsplitter_unitary(lam: float, dim: int) -> np.ndarray:
    """Two-mode beamsplitter of transmissivity ``lam`` on a ``dim^2`` space.

    Built as ``exp(theta (a^dag b - a b^dag))`` with ``cos(theta) = sqrt(lam)``,
    sector by sector in total photon number.  In the Heisenberg picture
    ``a -> sqrt(lam) a + sqrt(1-lam) b`` and ``b -> sqrt(lam) b - sqrt(1-lam) a``.
    Sectors with ``n >= dim`` are cut by the truncation; their blocks are the
    exponentials of the truncated generator, which keeps the matrix unitary and
    photon-number conserving.
    """
    theta = _bs_angle(lam)
    u = np.zeros((dim * dim, dim * dim))
    for n in range(2 * dim - 1):
        ks = np.arange(max(0, n - dim + 1), min(n, dim - 1) + 1)
        gen = _sector_generator(n, theta)[np.ix_(ks, ks)]
        idx = ks * dim + (n - ks)
        u[np.ix_(idx, idx)] = scipy.linalg.expm(gen)
    return u


def tensor(rho: DensityMatrix, sigma: DensityMatrix) -> DensityMatrix:
    """Two-mode product state; the smaller cutoff is zero-padded."""
    if rho.modes != 1 or sigma.modes != 1:
        raise ModeCountError("tensor expects two single-mode states")
    dim = max(rho.dim, sigma.dim)
    if rho.dim < dim:
        rho = rho.padded(dim)
    if sigma.dim < dim:
        sigma = sigma.padded(dim)
    return DensityMatrix(np.kron(rho.data, sigma.data), modes=2)


def partial_trace(rho: DensityMatrix, keep: int = 1) -> DensityMatrix:
    """Reduce a two-mode state to mode ``keep`` (1 = system, 2 = environment)."""
    if rho.modes != 2:
        raise ModeCountError(f"partial trace needs a two-mode state, got modes={rho.modes}")
    if keep not in (1, 2):
        raise DomainError(f"keep must be 1 or 2, got {keep}")
    d = rho.dim
    t = rho.data.reshape(d, d, d, d)
    red = np.einsum("ijkj->ik", t) if keep == 1 else np.einsum("jijk->ik", t)
    return DensityMatrix(_hermitize(red))


def unitary_conjugate(u: np.ndarray, rho: DensityMatrix) -> DensityMatrix:
    return DensityMatrix(_hermitize(u @ rho.data @ u.conj().T), modes=rho.modes)


def von_neumann_entropy(rho: DensityMatrix) -> float:
    """Entropy ``-tr rho ln rho`` in nats."""
    ev = rho.eigenvalues
    if ev[0] < -NEGATIVITY_TOL:
        raise NumericalError(f"negative eigenvalue {ev[0]:.3e}")
    ev = ev[ev > EIGEN_CLIP * np.sum(ev)]
    return max(0.0, float(-np.sum(ev * np.log(ev))))


def mean_photon_number(rho: DensityMatrix) -> float:
    """Mean photon number, summed over modes for two-mode states."""
    pops = rho.populations()
    d = rho.dim
    n = np.arange(d)
    if rho.modes == 1:
        return float(pops @ n)
    total = (n[:, None] + n[None, :]).reshape(-1)
    return float(pops @ total)


def trace_distance(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """Half the trace norm of the difference (cutoffs are aligned by padding)."""
    a, b = rho.data, sigma.data
    if a.shape != b.shape:
        if rho.modes != 1 or sigma.modes != 1:
            raise ModeCountError("cannot align two-mode states of different cutoffs")
        d = max(rho.dim, sigma.dim)
        a, b = rho.padded(d).data, sigma.padded(d).data
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(a - b))))


def random_density_matrix(
    dim: int, cap: float, seed, rank: Optional[int] = None
) -> DensityMatrix:
    """Seeded random state with mean photon number at most ``cap``.

    A complex Ginibre matrix ``G`` (``dim x rank``, square by default) gives
    ``G G^dag``; if its mean photon number exceeds ``cap`` it is damped by a
    geometric envelope ``diag(q^(n/2))`` on both sides, with ``q`` found by
    bisection so the cap is met exactly.
    """
    if cap < 0:
        raise DomainError(f"photon cap must be non-negative, got {cap}")
    rng = np.random.default_rng(seed)
    r = dim if rank is None else rank
    g = rng.standard_normal((dim, r)) + 1j * rng.standard_normal((dim, r))
    mat = g @ g.conj().T
    n = np.arange(dim)

    def damped(q):
        env = q ** (n / 2.0)
        out = env[:, None] * mat * env[None, :]
        return out / np.trace(out).real

    rho = mat / np.trace(mat).real
    if np.real(np.diag(rho)) @ n > cap:
        target = cap * (1 - 1e-12)
        if target <= 0:
            q = 0.0
        else:
            q = scipy.optimize.brentq(
                lambda q: np.real(np.diag(damped(q))) @ n - target, 0.0, 1.0, xtol=1e-15
            )
        rho = damped(q) if q > 0 else np.diag(np.eye(dim)[0]).astype(complex)
    return DensityMatrix(_hermitize(rho))
