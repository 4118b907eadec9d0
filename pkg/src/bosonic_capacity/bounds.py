"""Closed-form capacity bounds for attenuators and classical-noise channels.

All values are in nats.  ``N`` is the mean input photon number.  EPI bounds
rest on proven entropy power inequalities; EPNI bounds assume the conjectured
entropy photon-number inequalities.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, List, Optional, Sequence

import numpy as np

from .channels import AttenuatorSpec, ChannelSpec, ClassicalNoiseSpec, CONSISTENCY_TOL
from .errors import DomainError, InconsistentSpecError
from .gauss import g_function as g
from .gauss import g_inverse

EPI = "EPI"
EPNI = "EPNI"
METHODS = (EPI, EPNI)
CSV_COLUMNS = ("N", "lower", "lower_clamped", "upper", "gap_bound", "method")


@dataclass(frozen=True)
class BoundReport:
    N: float
    lower: float
    upper: float
    gap_bound: float
    method: str
    spec: dict = field(default_factory=dict)

    @property
    def lower_clamped(self) -> float:
        return max(0.0, self.lower)

    @property
    def gap(self) -> float:
        return self.upper - self.lower

    def to_dict(self) -> dict:
        out = asdict(self)
        out["lower_clamped"] = self.lower_clamped
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "BoundReport":
        return cls(
            N=float(obj["N"]),
            lower=float(obj["lower"]),
            upper=float(obj["upper"]),
            gap_bound=float(obj["gap_bound"]),
            method=obj["method"],
            spec=dict(obj.get("spec", {})),
        )


def _check_attenuator(N, lam, n_env, s_env):
    if N < 0:
        raise DomainError(f"photon budget must be non-negative, got {N}")
    if not 0.0 <= lam <= 1.0:
        raise DomainError(f"transmissivity must lie in [0, 1], got {lam}")
    if n_env < 0 or s_env < 0:
        raise DomainError("environment photon number and entropy must be non-negative")
    if s_env > g(n_env) + CONSISTENCY_TOL:
        raise InconsistentSpecError(f"S_E = {s_env} exceeds g(N_E) = {g(n_env):.6f}")


def _check_noise(N, t, e_f, h_f):
    if N < 0:
        raise DomainError(f"photon budget must be non-negative, got {N}")
    if not t > 0 or not e_f > 0:
        raise DomainError("t and E(f) must be positive")
    if h_f > math.log(math.pi * math.e * e_f) + CONSISTENCY_TOL:
        raise InconsistentSpecError(f"H(f) = {h_f} exceeds ln(pi e E(f)) = {math.log(math.pi * math.e * e_f):.6f}")


def attenuator_bounds_epi(
    N: float, lam: float, n_env: float, s_env: float, n_ep: Optional[float] = None
) -> BoundReport:
    """Coherent-coding lower bound and EPI upper bound for ``E_{lam, sigma_E}``.

    ``n_ep`` (the entropy photon number of the environment) defaults to
    ``g^-1(s_env)``; pass it when it is known exactly, e.g. for thermal states.
    """
    _check_attenuator(N, lam, n_env, s_env)
    if n_ep is None:
        n_ep = g_inverse(s_env)
    mu = 1.0 - lam
    log_term = math.log(lam + mu * math.exp(s_env))
    lower = g(lam * N + mu * n_ep) - g(mu * n_env)
    upper = g(lam * N + mu * n_env) - log_term
    gap = 2 * g(mu * n_env) - g(mu * n_ep) - log_term
    spec = {"lambda": lam, "N_E": n_env, "S_E": s_env, "N_E_ep": n_ep}
    return BoundReport(N, lower, upper, gap, EPI, spec)


def attenuator_bounds_epni(
    N: float, lam: float, n_env: float, s_env: float, n_ep: Optional[float] = None
) -> BoundReport:
    """Attenuator bounds with the upper bound sharpened by the EPNI conjecture."""
    _check_attenuator(N, lam, n_env, s_env)
    if n_ep is None:
        n_ep = g_inverse(s_env)
    mu = 1.0 - lam
    lower = g(lam * N + mu * n_ep) - g(mu * n_env)
    upper = g(lam * N + mu * n_env) - g(mu * n_ep)
    gap = 2 * (g(mu * n_env) - g(mu * n_ep))
    spec = {"lambda": lam, "N_E": n_env, "S_E": s_env, "N_E_ep": n_ep}
    return BoundReport(N, lower, upper, gap, EPNI, spec)


def classical_noise_bounds_epi(N: float, t: float, e_f: float, h_f: float) -> BoundReport:
    """Coherent-coding lower bound and EPI upper bound for ``F_{t, f}``."""
    _check_noise(N, t, e_f, h_f)
    added = math.pi * t * e_f
    noise_power = t * math.exp(h_f)
    lower = math.log(math.exp(g(N)) + noise_power) - g(added)
    upper = g(N + added) - math.log1p(noise_power)
    gap = 2 * g(added) - math.log1p(noise_power)
    spec = {"t": t, "E_f": e_f, "H_f": h_f}
    return BoundReport(N, lower, upper, gap, EPI, spec)


def classical_noise_bounds_epni(N: float, t: float, e_f: float, h_f: float) -> BoundReport:
    """Classical-noise bounds assuming the classical-quantum EPNI."""
    _check_noise(N, t, e_f, h_f)
    added = math.pi * t * e_f
    photon_power = t * math.exp(h_f - 1.0)
    lower = g(N + photon_power) - g(added)
    upper = g(N + added) - g(photon_power)
    gap = 2 * (g(added) - g(photon_power))
    spec = {"t": t, "E_f": e_f, "H_f": h_f}
    return BoundReport(N, lower, upper, gap, EPNI, spec)


def gaussian_attenuator_capacity(N: float, lam: float, n_env: float) -> float:
    """Capacity of the thermal-noise attenuator."""
    return g(lam * N + (1 - lam) * n_env) - g((1 - lam) * n_env)


def gaussian_noise_capacity(N: float, t: float) -> float:
    """Capacity of the classical-noise channel with a standard normal density."""
    return g(N + 2 * math.pi * t) - g(2 * math.pi * t)


def shannon_additive_bounds(P: float, h_noise: float, noise_power: float, prefactor: float = 1.0):
    """Bounds on the capacity of the real additive-noise channel ``Y = X + Z``.

    Returns ``(lower, upper)`` with ``lower = c ln((P + N1)/N1)`` and
    ``upper = c ln((P + N)/N1)`` where ``N1 = e^{2 H(Z)}/(2 pi e)`` is the entropy
    power of the noise.  The default ``c = 1`` omits the factor 1/2 of
    Shannon's per-sample bounds; pass ``prefactor=0.5`` to include it.
    """
    if P < 0 or noise_power <= 0:
        raise DomainError("P must be non-negative and the noise power positive")
    n1 = math.exp(2 * h_noise) / (2 * math.pi * math.e)
    if n1 > noise_power * (1 + CONSISTENCY_TOL) + CONSISTENCY_TOL:
        raise InconsistentSpecError(f"entropy power {n1:.6g} exceeds noise power {noise_power:.6g}")
    lower = prefactor * math.log1p(P / n1)
    upper = prefactor * math.log((P + noise_power) / n1)
    return lower, upper


def channel_bounds(spec: ChannelSpec, N: float, method: str = EPI) -> BoundReport:
    if method not in METHODS:
        raise DomainError(f"method must be one of {METHODS}, got {method!r}")
    if isinstance(spec, AttenuatorSpec):
        env = spec.env
        fn = attenuator_bounds_epi if method == EPI else attenuator_bounds_epni
        rep = fn(N, spec.lam, env.mean_photon, env.entropy, env.entropy_photon_number)
    else:
        f = spec.noise
        fn = classical_noise_bounds_epi if method == EPI else classical_noise_bounds_epni
        rep = fn(N, spec.t, f.energy, f.entropy)
    return BoundReport(rep.N, rep.lower, rep.upper, rep.gap_bound, rep.method, spec.summary())


def bound_curve(spec: ChannelSpec, grid: Iterable[float], method: str = EPI) -> List[BoundReport]:
    """Bound reports along a sorted grid of photon budgets."""
    if method not in METHODS:
        raise DomainError(f"method must be one of {METHODS}, got {method!r}")
    grid = [float(n) for n in grid]
    if any(n < 0 for n in grid):
        raise DomainError("photon budgets must be non-negative")
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise DomainError("photon-budget grid must be sorted")
    if isinstance(spec, AttenuatorSpec):
        env = spec.env
        n_env, s_env, n_ep = env.mean_photon, env.entropy, env.entropy_photon_number
        fn = attenuator_bounds_epi if method == EPI else attenuator_bounds_epni
        reports = [fn(N, spec.lam, n_env, s_env, n_ep) for N in grid]
    elif isinstance(spec, ClassicalNoiseSpec):
        e_f, h_f = spec.noise.energy, spec.noise.entropy
        fn = classical_noise_bounds_epi if method == EPI else classical_noise_bounds_epni
        reports = [fn(N, spec.t, e_f, h_f) for N in grid]
    else:
        raise DomainError(f"unsupported channel spec {spec!r}")
    summary = spec.summary()
    return [BoundReport(r.N, r.lower, r.upper, r.gap_bound, r.method, summary) for r in reports]


def reports_to_csv(reports: Sequence[BoundReport], header: Sequence[str] = ()) -> str:
    buf = io.StringIO()
    for line in header:
        buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in reports:
        writer.writerow([repr(r.N), repr(r.lower), repr(r.lower_clamped), repr(r.upper), repr(r.gap_bound), r.method])
    return buf.getvalue()


def reports_from_csv(text: str) -> List[BoundReport]:
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    rows = csv.DictReader(lines)
    return [BoundReport.from_dict(row) for row in rows]


def gap_profile(reports: Sequence[BoundReport]) -> np.ndarray:
    return np.array([r.gap for r in reports])


WIDE_COLUMNS = ("N",) + tuple(f"{m.lower()}_{c}" for m in METHODS for c in ("lower", "upper", "gap_bound"))


def reports_to_wide_csv(epi: Sequence[BoundReport], epni: Sequence[BoundReport], header: Sequence[str] = ()) -> str:
    """One row per photon budget with EPI and EPNI columns side by side."""
    if [r.N for r in epi] != [r.N for r in epni]:
        raise DomainError("EPI and EPNI curves must share a grid")
    buf = io.StringIO()
    for line in header:
        buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(WIDE_COLUMNS)
    for a, b in zip(epi, epni):
        writer.writerow([repr(a.N)] + [repr(v) for r in (a, b) for v in (r.lower, r.upper, r.gap_bound)])
    return buf.getvalue()


def reports_from_wide_csv(text: str) -> dict:
    """Inverse of :func:`reports_to_wide_csv`; returns ``{method: [BoundReport]}``."""
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    out = {m: [] for m in METHODS}
    for row in csv.DictReader(lines):
        for m in METHODS:
            p = m.lower()
            out[m].append(
                BoundReport(float(row["N"]), float(row[f"{p}_lower"]), float(row[f"{p}_upper"]), float(row[f"{p}_gap_bound"]), m)
            )
    return out
