import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bosonic_capacity import bounds as bd
from bosonic_capacity.channels import AttenuatorSpec, ClassicalNoiseSpec, EnvironmentSpec, NoiseDensity
from bosonic_capacity.errors import DomainError, InconsistentSpecError
from bosonic_capacity.gauss import g_function as g


def g_ref(n):
    """Independent oracle: the textbook formula."""
    return 0.0 if n == 0 else (n + 1) * math.log(n + 1) - n * math.log(n)


# g^-1(0.91) by bisection on g_ref (60 halvings)
NEP_091 = 0.46024208893492624
LN151 = math.log(15.1)


class TestAttenuatorEPI:
    def test_fig1_endpoint(self):
        rep = bd.attenuator_bounds_epi(0.0, 0.75, 2.0, 0.91)
        assert rep.upper == pytest.approx(0.6391720400639884, abs=1e-12)
        assert rep.lower == pytest.approx(-0.5845364559245889, abs=1e-12)
        assert rep.gap_bound == pytest.approx(1.2237084959885773, abs=1e-12)
        assert rep.lower_clamped == 0.0
        assert rep.method == bd.EPI

    def test_formula(self):
        N, lam, ne, se = 3.2, 0.4, 1.5, 0.7
        nep = bd.g_inverse(se)
        rep = bd.attenuator_bounds_epi(N, lam, ne, se)
        mu = 1 - lam
        assert rep.lower == pytest.approx(g_ref(lam * N + mu * nep) - g_ref(mu * ne), abs=1e-12)
        assert rep.upper == pytest.approx(g_ref(lam * N + mu * ne) - math.log(lam + mu * math.exp(se)), abs=1e-12)

    @pytest.mark.parametrize("N", [0.0, 1.0, 7.5])
    def test_thermal_lower_is_gaussian_capacity(self, N):
        rep = bd.attenuator_bounds_epi(N, 0.6, 2.0, g(2.0), n_ep=2.0)
        assert rep.lower == pytest.approx(bd.gaussian_attenuator_capacity(N, 0.6, 2.0), abs=1e-12)

    @pytest.mark.parametrize("N", [0.0, 0.5, 3.0, 100.0])
    def test_pure_loss(self, N):
        rep = bd.attenuator_bounds_epi(N, 0.75, 0.0, 0.0)
        assert rep.lower == rep.upper == pytest.approx(g_ref(0.75 * N), abs=1e-14)
        assert rep.gap_bound == 0.0

    def test_inconsistent_environment(self):
        with pytest.raises(InconsistentSpecError):
            bd.attenuator_bounds_epi(1.0, 0.5, 1.0, 1.5)

    @pytest.mark.parametrize("args", [(-1, 0.5, 1, 0.5), (1, 1.2, 1, 0.5), (1, 0.5, -1, 0)])
    def test_domain(self, args):
        with pytest.raises(DomainError):
            bd.attenuator_bounds_epi(*args)


class TestAttenuatorEPNI:
    def test_fig1_gap(self):
        rep = bd.attenuator_bounds_epni(0.0, 0.75, 2.0, 0.91)
        assert rep.gap_bound == pytest.approx(2 * (g_ref(0.5) - g_ref(0.25 * NEP_091)), abs=1e-12)
        assert abs(rep.gap_bound - 1.1694) < 1e-3

    def test_lower_equals_epi_lower(self):
        a = bd.attenuator_bounds_epi(2.0, 0.3, 1.0, 0.5)
        b = bd.attenuator_bounds_epni(2.0, 0.3, 1.0, 0.5)
        assert a.lower == b.lower

    @pytest.mark.parametrize("N", [0.0, 1.0, 20.0])
    def test_thermal_collapse(self, N):
        rep = bd.attenuator_bounds_epni(N, 0.4, 3.0, g(3.0), n_ep=3.0)
        assert rep.upper == rep.lower
        assert rep.gap_bound == 0.0

    @pytest.mark.parametrize("n", [1, 2, 5])
    def test_number_env_gap(self, n):
        rep = bd.attenuator_bounds_epni(1.0, 0.75, float(n), 0.0)
        assert rep.gap_bound == pytest.approx(2 * g_ref(0.25 * n), abs=1e-12)

    @given(
        N=st.floats(0, 50),
        lam=st.floats(0, 1),
        ne=st.floats(0, 10),
        frac=st.floats(0, 1),
    )
    def test_epni_upper_dominates_when_condition_holds(self, N, lam, ne, frac):
        se = frac * g(ne)
        epi = bd.attenuator_bounds_epi(N, lam, ne, se)
        epni = bd.attenuator_bounds_epni(N, lam, ne, se)
        if g((1 - lam) * bd.g_inverse(se)) >= math.log(lam + (1 - lam) * math.exp(se)):
            assert epni.upper <= epi.upper + 1e-12


class TestClassicalNoise:
    def test_fig2_endpoints(self):
        epi = bd.classical_noise_bounds_epi(0.0, 1.0, 2.0, LN151)
        assert epi.upper == pytest.approx(0.13472048034156447, abs=1e-12)
        assert epi.lower == pytest.approx(-0.13472048034156447, abs=1e-12)
        assert abs(epi.upper - 0.136) < 2e-3 and abs(epi.lower + 0.136) < 2e-3
        epni = bd.classical_noise_bounds_epni(0.0, 1.0, 2.0, LN151)
        assert epni.lower == pytest.approx(g_ref(15.1 / math.e) - g_ref(2 * math.pi), abs=1e-12)
        assert epni.gap_bound == pytest.approx(2 * (g_ref(2 * math.pi) - g_ref(15.1 / math.e)), abs=1e-12)

    @pytest.mark.parametrize("t", [0.3, 1.0, 3.0])
    @pytest.mark.parametrize("N", [0.0, 1.0, 10.0])
    def test_gaussian_collapse(self, t, N):
        h = math.log(2 * math.pi * math.e)
        rep = bd.classical_noise_bounds_epni(N, t, 2.0, h)
        assert rep.lower == pytest.approx(bd.gaussian_noise_capacity(N, t), abs=1e-12)
        assert rep.upper == pytest.approx(bd.gaussian_noise_capacity(N, t), abs=1e-12)

    def test_noiseless_limit(self):
        rep = bd.classical_noise_bounds_epi(3.0, 1e-9, 2.0, 1.0)
        assert rep.upper == pytest.approx(g(3.0), abs=1e-6)
        assert rep.lower == pytest.approx(g(3.0), abs=1e-6)

    def test_inconsistent(self):
        with pytest.raises(InconsistentSpecError):
            bd.classical_noise_bounds_epi(0.0, 1.0, 2.0, math.log(18.0))

    @pytest.mark.parametrize("args", [(-1, 1, 2, 1), (1, 0, 2, 1), (1, 1, 0, 1)])
    def test_domain(self, args):
        with pytest.raises(DomainError):
            bd.classical_noise_bounds_epni(*args)


class TestShannon:
    def test_gaussian_noise_coincides(self):
        P, var = 3.0, 0.7
        h = 0.5 * math.log(2 * math.pi * math.e * var)
        lo, hi = bd.shannon_additive_bounds(P, h, var)
        assert lo == pytest.approx(hi, abs=1e-12)

    def test_zero_power(self):
        lo, _ = bd.shannon_additive_bounds(0.0, 0.3, 1.0)
        assert lo == 0.0

    def test_uniform_gap(self):
        var = 1.0
        h = math.log(math.sqrt(12 * var))
        lo, hi = bd.shannon_additive_bounds(2.0, h, var)
        n1 = 12 * var / (2 * math.pi * math.e)
        assert hi - lo == pytest.approx(math.log((2.0 + var) / (2.0 + n1)), abs=1e-12)
        assert hi > lo

    def test_prefactor(self):
        a = bd.shannon_additive_bounds(2.0, 0.5, 1.0)
        b = bd.shannon_additive_bounds(2.0, 0.5, 1.0, prefactor=0.5)
        assert b == pytest.approx(tuple(0.5 * v for v in a))

    def test_inconsistent(self):
        with pytest.raises(InconsistentSpecError):
            bd.shannon_additive_bounds(1.0, 2.0, 0.5)


def _non_gaussian_specs():
    return [
        AttenuatorSpec(0.75, EnvironmentSpec.number(1)),
        AttenuatorSpec(0.5, EnvironmentSpec.number(3)),
        AttenuatorSpec(0.2, EnvironmentSpec.number(10)),
        AttenuatorSpec(0.9, EnvironmentSpec.superposition([1, 1, 1])),
        AttenuatorSpec(0.75, EnvironmentSpec.moments(2.0, 0.91)),
        ClassicalNoiseSpec(1.0, NoiseDensity.uniform_disc(1.0)),
        ClassicalNoiseSpec(0.3, NoiseDensity.uniform_disc(3.0)),
        ClassicalNoiseSpec(1.0, NoiseDensity.mixture([(0.5, 0.2 * np.eye(2), (1, 0)), (0.5, 0.2 * np.eye(2), (-1, 0))])),
        ClassicalNoiseSpec(2.0, NoiseDensity.mixture([(0.2, np.eye(2), (0, 0)), (0.8, 0.1 * np.eye(2), (0, 2))])),
        ClassicalNoiseSpec(1.0, NoiseDensity.stats(2.0, LN151)),
    ]


class TestCurves:
    @pytest.mark.parametrize("method", bd.METHODS)
    @pytest.mark.parametrize("spec", _non_gaussian_specs(), ids=lambda s: f"{s.kind}-{s.summary()['variant']}")
    def test_gap_property(self, spec, method):
        grid = np.concatenate([np.linspace(0, 10, 201), np.linspace(10.5, 1000, 400)])
        reports = bd.bound_curve(spec, grid, method)
        gaps = bd.gap_profile(reports)
        assert np.all(np.diff(gaps) <= 1e-12)
        assert np.all(gaps <= reports[0].gap_bound + 1e-9)
        lowers = np.array([r.lower for r in reports])
        uppers = np.array([r.upper for r in reports])
        assert np.all(np.diff(lowers) >= 0) and np.all(np.diff(uppers) >= 0)
        assert np.all(uppers >= lowers - 1e-12)

    def test_unsorted_grid(self):
        with pytest.raises(DomainError):
            bd.bound_curve(_non_gaussian_specs()[0], [1.0, 0.5])

    def test_negative_grid(self):
        with pytest.raises(DomainError):
            bd.bound_curve(_non_gaussian_specs()[0], [-1.0, 0.5])

    def test_bad_method(self):
        with pytest.raises(DomainError):
            bd.bound_curve(_non_gaussian_specs()[0], [0.0], "both")

    def test_channel_bounds_matches_curve(self):
        spec = _non_gaussian_specs()[5]
        assert bd.channel_bounds(spec, 2.0, bd.EPNI).to_dict() == bd.bound_curve(spec, [2.0], bd.EPNI)[0].to_dict()

    def test_pure_loss_curve(self):
        reports = bd.bound_curve(AttenuatorSpec(0.75, EnvironmentSpec.number(0)), np.linspace(0, 5, 11))
        assert all(r.upper == r.lower for r in reports)


class TestSerialization:
    def test_report_json_round_trip(self):
        rep = bd.channel_bounds(_non_gaussian_specs()[4], 1.5)
        back = bd.BoundReport.from_dict(json.loads(json.dumps(rep.to_dict())))
        assert back == rep

    def test_csv_round_trip(self):
        reports = bd.bound_curve(_non_gaussian_specs()[6], [0.0, 0.1, 2.5, 1e3], bd.EPNI)
        text = bd.reports_to_csv(reports, ["a header", "units: nats"])
        assert text.startswith("# a header\n# units: nats\nN,lower,lower_clamped,upper,gap_bound,method\n")
        back = bd.reports_from_csv(text)
        for a, b in zip(reports, back):
            assert (a.N, a.lower, a.upper, a.gap_bound, a.method) == (b.N, b.lower, b.upper, b.gap_bound, b.method)

    def test_wide_csv_round_trip(self):
        spec = _non_gaussian_specs()[0]
        grid = [0.0, 0.3, 7.0]
        epi, epni = bd.bound_curve(spec, grid, bd.EPI), bd.bound_curve(spec, grid, bd.EPNI)
        back = bd.reports_from_wide_csv(bd.reports_to_wide_csv(epi, epni, ["x"]))
        for method, orig in ((bd.EPI, epi), (bd.EPNI, epni)):
            assert [(r.N, r.lower, r.upper, r.gap_bound) for r in back[method]] == [
                (r.N, r.lower, r.upper, r.gap_bound) for r in orig
            ]

    def test_wide_csv_grid_mismatch(self):
        spec = _non_gaussian_specs()[0]
        with pytest.raises(DomainError):
            bd.reports_to_wide_csv(bd.bound_curve(spec, [0.0]), bd.bound_curve(spec, [1.0], bd.EPNI))
