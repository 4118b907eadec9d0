"""Attenuator and classical-noise channels on truncated Fock spaces.

The attenuator ``E_{lam, sigma}`` mixes the input with an environment state on
a beamsplitter of transmissivity ``lam`` and discards the environment.  The
classical-noise channel ``F_{t, f}`` applies a random displacement drawn from
the phase-space density ``f`` scaled by ``sqrt(t)``; a point mass at ``xi``
adds ``pi t |xi|^2`` photons, i.e. it displaces by
``alpha = -sqrt(pi t) (xi_1 + i xi_2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
import scipy.special

from . import fockcore
from .errors import CoverageError, DomainError, InconsistentSpecError, TruncationError
from .fockcore import DensityMatrix
from .gauss import GaussianMoments, extract_moments, g_function, g_inverse

TAIL_TOL = 1e-6
CONSISTENCY_TOL = 1e-9
DEFAULT_NODES = 41
NODE_WEIGHT_FLOOR = 1e-18

ENV_VARIANTS = ("thermal", "number", "coherent", "superposition", "explicit", "moments")
NOISE_VARIANTS = ("gaussian", "gaussian-mixture", "uniform-disc", "tabulated", "stats")


# ---------------------------------------------------------------------------
# Environment states


@dataclass(frozen=True, eq=False)
class EnvironmentSpec:
    """Environment state of an attenuator.

    Build with the named constructors.  ``moments`` carries only the mean
    photon number and entropy (enough for the bounds, not for simulation).
    """

    variant: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.variant not in ENV_VARIANTS:
            raise DomainError(f"unknown environment variant {self.variant!r}")
        if self.variant == "moments":
            n_env, s_env = self.params["N_E"], self.params["S_E"]
            if n_env < 0 or s_env < 0:
                raise DomainError("N_E and S_E must be non-negative")
            if s_env > g_function(n_env) + CONSISTENCY_TOL:
                raise InconsistentSpecError(
                    f"S_E = {s_env} exceeds g(N_E) = {g_function(n_env):.6f}; "
                    "no state has more entropy than the thermal state of equal energy"
                )

    @classmethod
    def thermal(cls, N: float) -> "EnvironmentSpec":
        if N < 0:
            raise DomainError(f"thermal mean photon number must be >= 0, got {N}")
        return cls("thermal", {"N": float(N)})

    @classmethod
    def number(cls, n: int) -> "EnvironmentSpec":
        if n < 0 or int(n) != n:
            raise DomainError(f"number state index must be a non-negative integer, got {n}")
        return cls("number", {"n": int(n)})

    @classmethod
    def coherent(cls, alpha: complex) -> "EnvironmentSpec":
        return cls("coherent", {"alpha": complex(alpha)})

    @classmethod
    def superposition(cls, coefficients) -> "EnvironmentSpec":
        c = np.asarray(coefficients, dtype=complex)
        if c.ndim != 1 or not np.any(c):
            raise DomainError("superposition needs a non-zero coefficient list")
        norm = np.linalg.norm(c)
        # already-normalized input is kept bit-exact so serialization round-trips
        if abs(norm - 1.0) > 1e-14:
            c = c / norm
        return cls("superposition", {"coefficients": c})

    @classmethod
    def explicit(cls, rho: DensityMatrix) -> "EnvironmentSpec":
        if rho.modes != 1:
            raise DomainError("environment must be a single-mode state")
        return cls("explicit", {"rho": rho})

    @classmethod
    def moments(cls, N_E: float, S_E: float) -> "EnvironmentSpec":
        return cls("moments", {"N_E": float(N_E), "S_E": float(S_E)})

    @property
    def mean_photon(self) -> float:
        v, p = self.variant, self.params
        if v == "thermal":
            return p["N"]
        if v == "number":
            return float(p["n"])
        if v == "coherent":
            return abs(p["alpha"]) ** 2
        if v == "superposition":
            c = p["coefficients"]
            return float(np.abs(c) ** 2 @ np.arange(c.size))
        if v == "explicit":
            return fockcore.mean_photon_number(p["rho"])
        return p["N_E"]

    @property
    def entropy(self) -> float:
        v, p = self.variant, self.params
        if v == "thermal":
            return g_function(p["N"])
        if v == "explicit":
            return fockcore.von_neumann_entropy(p["rho"])
        if v == "moments":
            return p["S_E"]
        return 0.0

    @property
    def entropy_photon_number(self) -> float:
        if self.variant == "thermal":
            return self.params["N"]
        return g_inverse(self.entropy)

    @property
    def is_gaussian(self) -> bool:
        return self.variant in ("thermal", "coherent") or (
            self.variant == "number" and self.params["n"] == 0
        )

    def state(self, dim: Optional[int] = None, tail: float = 1e-12) -> DensityMatrix:
        """Density matrix of the environment.

        Without ``dim`` the cutoff is chosen so the discarded tail is below
        ``tail``.
        """
        v, p = self.variant, self.params
        if v == "thermal":
            d = dim or fockcore.thermal_dim(p["N"], tail)
            return fockcore.make_thermal_state(p["N"], d)
        if v == "number":
            return fockcore.make_number_state(p["n"], dim or p["n"] + 1)
        if v == "coherent":
            alpha = p["alpha"]
            if dim is None:
                dim = max(1, math.ceil(4 * abs(alpha) ** 2))
                while fockcore.coherent_tail_mass(alpha, dim) > tail:
                    dim += 1
            return fockcore.make_coherent_state(alpha, dim)
        if v == "superposition":
            c = p["coefficients"]
            if dim is not None and dim > c.size:
                c = np.concatenate([c, np.zeros(dim - c.size)])
            return fockcore.make_pure_state(c)
        if v == "explicit":
            rho = p["rho"]
            return rho.padded(dim) if dim and dim > rho.dim else rho
        raise DomainError("a 'moments' environment has no density matrix; give a concrete state")

    def gaussian_moments(self) -> GaussianMoments:
        v, p = self.variant, self.params
        if v == "thermal":
            return GaussianMoments.thermal(p["N"])
        if v == "number":
            return GaussianMoments.thermal(p["n"])
        if v == "coherent":
            a = p["alpha"]
            return GaussianMoments(math.sqrt(2) * np.array([a.real, a.imag]), 0.5 * np.eye(2))
        return extract_moments(self.state())

    def summary(self) -> dict:
        return {
            "variant": self.variant,
            "N_E": self.mean_photon,
            "S_E": self.entropy,
            "N_E_ep": self.entropy_photon_number,
        }

    def to_dict(self) -> dict:
        v, p = self.variant, self.params
        if v == "coherent":
            return {"variant": v, "alpha": [p["alpha"].real, p["alpha"].imag]}
        if v == "superposition":
            c = p["coefficients"]
            return {"variant": v, "coefficients": [[z.real, z.imag] for z in c]}
        if v == "explicit":
            return {"variant": v, "rho": p["rho"].to_dict()}
        return {"variant": v, **p}

    @classmethod
    def from_dict(cls, obj: dict) -> "EnvironmentSpec":
        v = obj.get("variant")
        if v == "thermal":
            return cls.thermal(obj["N"])
        if v == "number":
            return cls.number(obj["n"])
        if v == "coherent":
            return cls.coherent(_as_complex(obj["alpha"]))
        if v == "superposition":
            return cls.superposition([_as_complex(z) for z in obj["coefficients"]])
        if v == "explicit":
            return cls.explicit(DensityMatrix.from_dict(obj["rho"]))
        if v == "moments":
            return cls.moments(obj["N_E"], obj["S_E"])
        raise DomainError(f"unknown environment variant {v!r}")


def _as_complex(z) -> complex:
    if isinstance(z, (list, tuple)):
        return complex(z[0], z[1])
    return complex(z)


# ---------------------------------------------------------------------------
# Phase-space noise densities


def _cov_sqrt(cov: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(cov)
    return v * np.sqrt(np.clip(w, 0.0, None))


def _gauss_hermite_2d(n: int):
    z, w = np.polynomial.hermite_e.hermegauss(n)
    w = w / math.sqrt(2 * math.pi)
    zz = np.stack(np.meshgrid(z, z, indexing="ij"), axis=-1).reshape(-1, 2)
    ww = np.outer(w, w).reshape(-1)
    return zz, ww


def _trapezoid_weights(lo: float, hi: float, n: int) -> np.ndarray:
    if n < 2:
        raise DomainError("a tabulated grid needs at least two points per axis")
    w = np.full(n, (hi - lo) / (n - 1))
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


@dataclass(frozen=True, eq=False)
class NoiseDensity:
    """Probability density on phase space ``R^2``.

    ``energy`` is the sum of second moments ``E(f)`` and ``entropy`` the
    differential entropy ``H(f)`` in nats.  ``stats`` carries only these two
    numbers.
    """

    variant: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.variant not in NOISE_VARIANTS:
            raise DomainError(f"unknown noise variant {self.variant!r}")
        if self.variant == "tabulated":
            vals = np.asarray(self.params["values"], dtype=float)
            if np.any(vals < 0):
                raise DomainError("tabulated density has negative values")
        e, h = self.energy, self.entropy
        if not (math.isfinite(e) and math.isfinite(h)):
            raise DomainError("noise energy and entropy must be finite")
        if e <= 0:
            raise DomainError(f"noise energy must be positive, got {e}")
        if h > math.log(math.pi * math.e * e) + CONSISTENCY_TOL:
            raise InconsistentSpecError(
                f"H(f) = {h:.6g} exceeds ln(pi e E(f)) = {math.log(math.pi * math.e * e):.6g}; "
                "no density of this energy has that much entropy"
            )

    @classmethod
    def gaussian(cls, cov=None, mean=(0.0, 0.0)) -> "NoiseDensity":
        cov = np.eye(2) if cov is None else np.asarray(cov, dtype=float)
        if cov.shape != (2, 2) or not np.allclose(cov, cov.T) or np.any(np.linalg.eigvalsh(cov) <= 0):
            raise DomainError("gaussian covariance must be a positive definite 2x2 matrix")
        return cls("gaussian", {"cov": cov, "mean": np.asarray(mean, dtype=float)})

    @classmethod
    def mixture(cls, components) -> "NoiseDensity":
        """``components``: iterable of ``(weight, cov, mean)``."""
        comps = []
        for weight, cov, mean in components:
            cov = np.asarray(cov, dtype=float)
            if weight <= 0 or np.any(np.linalg.eigvalsh(cov) <= 0):
                raise DomainError("mixture weights must be positive and covariances positive definite")
            comps.append((float(weight), cov, np.asarray(mean, dtype=float)))
        if not comps:
            raise DomainError("mixture needs at least one component")
        total = sum(c[0] for c in comps)
        comps = tuple((w / total, c, m) for w, c, m in comps)
        return cls("gaussian-mixture", {"components": comps})

    @classmethod
    def uniform_disc(cls, radius: float, center=(0.0, 0.0)) -> "NoiseDensity":
        if radius <= 0:
            raise DomainError(f"disc radius must be positive, got {radius}")
        return cls("uniform-disc", {"radius": float(radius), "center": np.asarray(center, dtype=float)})

    @classmethod
    def tabulated(cls, xmin, xmax, ymin, ymax, values) -> "NoiseDensity":
        """Density sampled on a regular grid; ``values`` has shape ``(ny, nx)``."""
        vals = np.asarray(values, dtype=float)
        if vals.ndim != 2:
            raise DomainError("tabulated values must form a 2-D grid")
        return cls(
            "tabulated",
            {"xmin": float(xmin), "xmax": float(xmax), "ymin": float(ymin), "ymax": float(ymax), "values": vals},
        )

    @classmethod
    def stats(cls, energy: float, entropy: float) -> "NoiseDensity":
        return cls("stats", {"energy": float(energy), "entropy": float(entropy)})

    # -- moments -----------------------------------------------------------

    def _components(self):
        v, p = self.variant, self.params
        if v == "gaussian":
            return ((1.0, p["cov"], p["mean"]),)
        if v == "gaussian-mixture":
            return p["components"]
        return None

    def _table(self):
        p = self.params
        vals = p["values"]
        ny, nx = vals.shape
        xs = np.linspace(p["xmin"], p["xmax"], nx)
        ys = np.linspace(p["ymin"], p["ymax"], ny)
        w = np.outer(_trapezoid_weights(p["ymin"], p["ymax"], ny), _trapezoid_weights(p["xmin"], p["xmax"], nx))
        mass = float(np.sum(w * vals))
        if mass <= 0:
            raise DomainError("tabulated density has zero mass")
        X, Y = np.meshgrid(xs, ys)
        return X, Y, w, vals / mass

    @property
    def mean(self) -> np.ndarray:
        v, p = self.variant, self.params
        comps = self._components()
        if comps is not None:
            return sum(w * m for w, _, m in comps)
        if v == "uniform-disc":
            return p["center"].copy()
        if v == "tabulated":
            X, Y, w, f = self._table()
            return np.array([np.sum(w * f * X), np.sum(w * f * Y)])
        raise DomainError("a 'stats' density has no first moments")

    @property
    def covariance(self) -> np.ndarray:
        v, p = self.variant, self.params
        comps = self._components()
        mu = self.mean
        if comps is not None:
            second = sum(w * (c + np.outer(m, m)) for w, c, m in comps)
            return second - np.outer(mu, mu)
        if v == "uniform-disc":
            return 0.25 * p["radius"] ** 2 * np.eye(2)
        if v == "tabulated":
            X, Y, w, f = self._table()
            dx, dy = X - mu[0], Y - mu[1]
            xy = np.sum(w * f * dx * dy)
            return np.array([[np.sum(w * f * dx * dx), xy], [xy, np.sum(w * f * dy * dy)]])
        raise DomainError("a 'stats' density has no covariance")

    @property
    def energy(self) -> float:
        if self.variant == "stats":
            return self.params["energy"]
        mu = self.mean
        return float(np.trace(self.covariance) + mu @ mu)

    @property
    def entropy(self) -> float:
        v, p = self.variant, self.params
        if v == "stats":
            return p["entropy"]
        if v == "gaussian":
            return 1.0 + math.log(2 * math.pi) + 0.5 * math.log(np.linalg.det(p["cov"]))
        if v == "uniform-disc":
            return math.log(math.pi * p["radius"] ** 2)
        if v == "tabulated":
            _, _, w, f = self._table()
            return float(-np.sum(w * scipy.special.xlogy(f, f)))
        # mixture: expectation of -ln f under each component by Gauss-Hermite
        z, wz = _gauss_hermite_2d(61)
        total = 0.0
        for wc, cov, mean in p["components"]:
            pts = mean + z @ _cov_sqrt(cov).T
            total -= wc * float(wz @ self.log_pdf(pts))
        return total

    def log_pdf(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        comps = self._components()
        if comps is None:
            if self.variant == "uniform-disc":
                r2 = np.sum((pts - self.params["center"]) ** 2, axis=1)
                inside = r2 <= self.params["radius"] ** 2
                return np.where(inside, -math.log(math.pi * self.params["radius"] ** 2), -np.inf)
            raise DomainError(f"log_pdf is not available for variant {self.variant!r}")
        logs = []
        for w, cov, m in comps:
            d = pts - m
            inv = np.linalg.inv(cov)
            quad = np.einsum("ki,ij,kj->k", d, inv, d)
            logs.append(math.log(w) - 0.5 * quad - math.log(2 * math.pi) - 0.5 * math.log(np.linalg.det(cov)))
        return scipy.special.logsumexp(np.stack(logs), axis=0)

    def quadrature(self, nodes: int = DEFAULT_NODES):
        """Nodes ``(K, 2)`` and weights ``(K,)`` integrating against ``f``.

        Gaussian components use tensor Gauss-Hermite rules, the disc a polar
        Gauss-Legendre x equal-angle rule, tabulated densities the trapezoid
        rule on their own grid.  Weights sum to the captured mass.
        """
        v, p = self.variant, self.params
        comps = self._components()
        if comps is not None:
            z, wz = _gauss_hermite_2d(nodes)
            pts = [m + z @ _cov_sqrt(c).T for _, c, m in comps]
            wts = [w * wz for w, _, _ in comps]
            return np.concatenate(pts), np.concatenate(wts)
        if v == "uniform-disc":
            R = p["radius"]
            x, wx = np.polynomial.legendre.leggauss(nodes)
            r = 0.5 * R * (x + 1.0)
            wr = 0.5 * R * wx * r
            phi = 2 * math.pi * (np.arange(nodes) + 0.5) / nodes
            rr, pp = np.meshgrid(r, phi, indexing="ij")
            pts = np.stack([rr * np.cos(pp), rr * np.sin(pp)], axis=-1).reshape(-1, 2) + p["center"]
            wts = np.outer(wr, np.full(nodes, 2 * math.pi / nodes)).reshape(-1) / (math.pi * R * R)
            return pts, wts
        if v == "tabulated":
            X, Y, w, f = self._table()
            return np.stack([X.reshape(-1), Y.reshape(-1)], axis=1), (w * f).reshape(-1)
        raise DomainError("a 'stats' density cannot be sampled; give a concrete density")

    @property
    def is_standard_gaussian(self) -> bool:
        return (
            self.variant == "gaussian"
            and np.allclose(self.params["cov"], np.eye(2), atol=1e-15)
            and not np.any(self.params["mean"])
        )

    def summary(self) -> dict:
        return {"variant": self.variant, "E_f": self.energy, "H_f": self.entropy}

    def to_dict(self) -> dict:
        v, p = self.variant, self.params
        if v == "gaussian":
            return {"variant": v, "cov": p["cov"].tolist(), "mean": p["mean"].tolist()}
        if v == "gaussian-mixture":
            return {
                "variant": v,
                "components": [{"weight": w, "cov": c.tolist(), "mean": m.tolist()} for w, c, m in p["components"]],
            }
        if v == "uniform-disc":
            return {"variant": v, "radius": p["radius"], "center": p["center"].tolist()}
        if v == "tabulated":
            ny, nx = p["values"].shape
            return {
                "variant": v,
                "xmin": p["xmin"], "xmax": p["xmax"], "ymin": p["ymin"], "ymax": p["ymax"],
                "nx": nx, "ny": ny, "values": p["values"].reshape(-1).tolist(),
            }
        return {"variant": v, **p}

    @classmethod
    def from_dict(cls, obj: dict) -> "NoiseDensity":
        v = obj.get("variant")
        if v == "gaussian":
            return cls.gaussian(obj.get("cov"), obj.get("mean", (0.0, 0.0)))
        if v == "gaussian-mixture":
            return cls.mixture((c["weight"], c["cov"], c.get("mean", (0.0, 0.0))) for c in obj["components"])
        if v == "uniform-disc":
            return cls.uniform_disc(obj["radius"], obj.get("center", (0.0, 0.0)))
        if v == "tabulated":
            vals = np.asarray(obj["values"], dtype=float).reshape(int(obj["ny"]), int(obj["nx"]))
            return cls.tabulated(obj["xmin"], obj["xmax"], obj["ymin"], obj["ymax"], vals)
        if v == "stats":
            return cls.stats(obj["energy"], obj["entropy"])
        raise DomainError(f"unknown noise variant {v!r}")


# ---------------------------------------------------------------------------
# Channel specifications


@dataclass(frozen=True, eq=False)
class AttenuatorSpec:
    lam: float
    env: EnvironmentSpec

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise DomainError(f"transmissivity must lie in [0, 1], got {self.lam}")

    kind = "attenuator"

    def summary(self) -> dict:
        return {"kind": self.kind, "lambda": self.lam, **self.env.summary()}

    def to_dict(self) -> dict:
        return {"kind": self.kind, "lambda": self.lam, "env": self.env.to_dict()}


@dataclass(frozen=True, eq=False)
class ClassicalNoiseSpec:
    t: float
    noise: NoiseDensity

    def __post_init__(self):
        if not self.t > 0:
            raise DomainError(f"noise strength t must be positive, got {self.t}")

    kind = "classical-noise"

    def summary(self) -> dict:
        return {"kind": self.kind, "t": self.t, **self.noise.summary()}

    def to_dict(self) -> dict:
        return {"kind": self.kind, "t": self.t, "dist": self.noise.to_dict()}


ChannelSpec = Union[AttenuatorSpec, ClassicalNoiseSpec]


def channel_from_dict(obj: dict) -> ChannelSpec:
    kind = obj.get("kind")
    if kind == "attenuator":
        return AttenuatorSpec(float(obj["lambda"]), EnvironmentSpec.from_dict(obj["env"]))
    if kind == "classical-noise":
        return ClassicalNoiseSpec(float(obj["t"]), NoiseDensity.from_dict(obj["dist"]))
    raise DomainError(f"unknown channel kind {kind!r}")


# ---------------------------------------------------------------------------
# Channel application


def _finish(out: np.ndarray, dim: Optional[int], tol: float, tail: float) -> DensityMatrix:
    """Truncate or pad a full output to ``dim`` and renormalize."""
    full = out.shape[0]
    if dim is not None and dim < full:
        lost = float(np.real(np.trace(out)) - np.real(np.trace(out[:dim, :dim])))
        if lost > tol:
            raise TruncationError(f"output cutoff {dim} discards mass {lost:.3e} > {tol:.1e}")
        out = out[:dim, :dim]
    elif dim is not None and dim > full:
        padded = np.zeros((dim, dim), dtype=complex)
        padded[:full, :full] = out
        out = padded
    out = 0.5 * (out + out.conj().T)
    return DensityMatrix(out / np.real(np.trace(out)), tail_mass=tail)


def attenuate_matrix(rho: np.ndarray, lam: float, sigma: np.ndarray) -> np.ndarray:
    """Exact beamsplitter output ``tr_E U (rho x sigma) U^dag`` as a matrix.

    ``rho`` (size Ds) and ``sigma`` (size De) are taken as exactly supported
    on their cutoffs; the output has size ``Ds + De - 1`` and loses no mass.
    The environment is diagonalized, ``sigma = sum_r p_r |v_r><v_r|``, and the
    channel is applied through Kraus operators
    ``L_{k,r} = sum_e v_r[e] <k|_E U |e>_E``, whose entries are read from the
    complete photon-number sectors of the beamsplitter.
    """
    ds, de = rho.shape[0], sigma.shape[0]
    nmax = ds + de - 2
    size = nmax + 1
    table = fockcore.beamsplitter_sector_table(lam, nmax)
    p, vecs = np.linalg.eigh(sigma)
    keep = p > 1e-16 * max(p.max(), 1e-300)
    p, vecs = p[keep], vecs[:, keep]
    out = np.zeros((size, size), dtype=complex)
    j = np.arange(ds)[None, :]
    for k in range(size):
        rows = size - k
        m = np.arange(rows)[:, None]
        n = m + k
        e = n - j
        valid = (e >= 0) & (e < de)
        amp = np.where(valid, table[n, m, j], 0.0)
        kraus = amp[None, :, :] * vecs.T[:, np.clip(e, 0, de - 1)]
        left = (kraus @ rho) * p[:, None, None]
        out[:rows, :rows] += np.transpose(left, (1, 0, 2)).reshape(rows, -1) @ (
            np.transpose(kraus, (1, 0, 2)).reshape(rows, -1).conj().T
        )
    return out


def apply_attenuator(
    rho: DensityMatrix,
    lam: float,
    env: Union[EnvironmentSpec, DensityMatrix],
    dim: Optional[int] = None,
    tail_tol: float = TAIL_TOL,
) -> DensityMatrix:
    """Output of the attenuator ``E_{lam, env}`` on ``rho``.

    Args:
        rho: single-mode input.
        lam: transmissivity in [0, 1].
        env: environment spec or explicit single-mode state.
        dim: output cutoff; by default the exact output of size
            ``rho.dim + env_dim - 1`` is returned.
        tail_tol: maximal tail mass allowed for the inputs and for mass
            discarded by an explicit output cutoff.

    Raises:
        TruncationError: an input's tail mass or the discarded output mass
            exceeds ``tail_tol``.
    """
    if not 0.0 <= lam <= 1.0:
        raise DomainError(f"transmissivity must lie in [0, 1], got {lam}")
    sigma = env.state() if isinstance(env, EnvironmentSpec) else env
    if rho.modes != 1 or sigma.modes != 1:
        raise DomainError("attenuator acts on single-mode states")
    for name, st in (("input", rho), ("environment", sigma)):
        if st.tail_mass > tail_tol:
            raise TruncationError(f"{name} tail mass {st.tail_mass:.3e} exceeds {tail_tol:.1e}")
    out = attenuate_matrix(rho.data, lam, sigma.data)
    return _finish(out, dim, tail_tol, rho.tail_mass + sigma.tail_mass)


def noise_amplitudes(t: float, points: np.ndarray) -> np.ndarray:
    """Displacement amplitudes for phase-space points scaled by ``sqrt(t)``."""
    return -math.sqrt(math.pi * t) * (points[:, 0] + 1j * points[:, 1])


def _noise_sum(rho: np.ndarray, alphas: np.ndarray, weights: np.ndarray, rows: int) -> np.ndarray:
    cols = rho.shape[0]
    out = np.zeros((rows, rows), dtype=complex)
    chunk = max(1, int(4e6 // (rows * cols)))
    for start in range(0, alphas.size, chunk):
        a = alphas[start : start + chunk]
        w = weights[start : start + chunk]
        d = fockcore.displacement_matrix_elements(a, rows, cols)
        left = (d @ rho) * w[:, None, None]
        out += np.transpose(left, (1, 0, 2)).reshape(rows, -1) @ (
            np.transpose(d, (1, 0, 2)).reshape(rows, -1).conj().T
        )
    return out


def apply_classical_noise(
    rho: DensityMatrix,
    t: float,
    f: NoiseDensity,
    nodes: int = DEFAULT_NODES,
    dim: Optional[int] = None,
    tol: float = TAIL_TOL,
) -> DensityMatrix:
    """Output of the classical-noise channel ``F_{t, f}`` on ``rho``.

    The phase-space integral is replaced by the quadrature rule of ``f`` and
    every node contributes ``D(alpha) rho D(alpha)^dag`` with exact
    displacement matrix elements.  The result is renormalized by the mass
    captured below the output cutoff.

    Args:
        dim: output cutoff.  By default it is grown until the captured mass
            reaches ``1 - tol``.
        tol: allowed loss of quadrature coverage and of output mass.

    Raises:
        CoverageError: the quadrature weights miss more than ``tol`` of f.
        TruncationError: the output cutoff captures less than ``1 - tol``.
    """
    if not t > 0:
        raise DomainError(f"noise strength t must be positive, got {t}")
    if rho.modes != 1:
        raise DomainError("classical noise acts on single-mode states")
    if rho.tail_mass > tol:
        raise TruncationError(f"input tail mass {rho.tail_mass:.3e} exceeds {tol:.1e}")
    pts, wts = f.quadrature(nodes)
    coverage = float(np.sum(wts))
    if abs(1.0 - coverage) > tol:
        raise CoverageError(f"quadrature captures mass {coverage:.9f} of the noise density")
    # nodes this light cannot move the output by more than rounding error
    keep = wts > NODE_WEIGHT_FLOOR * wts.max()
    alphas = noise_amplitudes(t, pts[keep])
    wts = wts[keep]
    auto = dim is None
    if auto:
        n_out = fockcore.mean_photon_number(rho) + math.pi * t * f.energy
        dim = max(rho.dim, fockcore.thermal_dim(n_out, tail=tol))
    while True:
        out = _noise_sum(rho.data, alphas, wts, dim)
        captured = float(np.real(np.trace(out))) / coverage
        if captured >= 1.0 - tol:
            break
        if not auto:
            raise TruncationError(f"output cutoff {dim} captures only {captured:.9f} of the mass")
        dim = math.ceil(dim * 1.5)
    return _finish(out, None, tol, rho.tail_mass + (1.0 - captured))


def apply_channel(spec: ChannelSpec, rho: DensityMatrix, **kwargs) -> DensityMatrix:
    if isinstance(spec, AttenuatorSpec):
        return apply_attenuator(rho, spec.lam, spec.env, **kwargs)
    return apply_classical_noise(rho, spec.t, spec.noise, **kwargs)


def output_moments(spec: ChannelSpec, moments: GaussianMoments) -> GaussianMoments:
    """Propagate first and second moments through a channel.

    Attenuator: ``mean -> sqrt(lam) mean + sqrt(1-lam) mean_E`` and
    ``cov -> lam cov + (1-lam) cov_E``.  Classical noise: the mean shifts by
    ``-sqrt(2 pi t) mean_f`` and ``cov -> cov + 2 pi t Cov(f)``.
    """
    if isinstance(spec, AttenuatorSpec):
        lam = spec.lam
        env = spec.env.gaussian_moments()
        return GaussianMoments(
            math.sqrt(lam) * moments.mean + math.sqrt(1 - lam) * env.mean,
            lam * moments.cov + (1 - lam) * env.cov,
        )
    t = spec.t
    return GaussianMoments(
        moments.mean - math.sqrt(2 * math.pi * t) * spec.noise.mean,
        moments.cov + 2 * math.pi * t * spec.noise.covariance,
    )


def holevo_coherent_rate(
    spec: ChannelSpec,
    N: float,
    dim: int = 30,
    nodes: int = DEFAULT_NODES,
    tail_tol: float = 1e-4,
) -> float:
    """Holevo rate of Gaussian-modulated coherent states, in nats.

    The ensemble averages to the thermal state of mean photon number ``N``.
    Both channel families commute with displacements, so every signal output
    has the entropy of the vacuum output and the rate is
    ``S(Phi(thermal_N)) - S(Phi(vacuum))``.  The thermal input is cut at
    ``dim``; ``tail_tol`` bounds the tail mass this may discard.
    """
    if N < 0:
        raise DomainError(f"photon budget must be non-negative, got {N}")
    if N == 0:
        return 0.0
    q = N / (N + 1.0)
    if q**dim > tail_tol:
        raise TruncationError(f"thermal N={N} loses mass {q ** dim:.3e} at dim={dim}")
    weights = q ** np.arange(dim)
    thermal = DensityMatrix(np.diag(weights / weights.sum()))
    vacuum = fockcore.make_number_state(0, 1)
    if isinstance(spec, AttenuatorSpec):
        sigma = spec.env.state()
        s_avg = fockcore.von_neumann_entropy(apply_attenuator(thermal, spec.lam, sigma))
        s_sig = fockcore.von_neumann_entropy(apply_attenuator(vacuum, spec.lam, sigma))
    else:
        s_avg = fockcore.von_neumann_entropy(apply_classical_noise(thermal, spec.t, spec.noise, nodes))
        s_sig = fockcore.von_neumann_entropy(apply_classical_noise(vacuum, spec.t, spec.noise, nodes))
    return s_avg - s_sig
