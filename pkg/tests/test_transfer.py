"""Cubic roots, self-mode structure, normalization, and transfer efficiency."""

import cmath
import math

import numpy as np
import pytest
from scipy.integrate import quad

from echomem import (
    DegenerateRootError,
    ReversalSnapshot,
    TransferConfig,
    cardano_roots,
    cavity_depopulation,
    characteristic_roots,
    dephasing_horizon,
    field_trace_values,
    mode_spectrum,
    normalization,
    overlap_integral_closed,
    response_kernel,
    self_mode,
    self_mode_trig,
    self_mode_values,
    time_reversal_map,
    transfer_efficiency,
)
from echomem.errors import SingularEvaluationError

REF = TransferConfig(delta_in=1.0, omega0=1.0, omega1=0.3)


def _sorted(nus):
    return sorted(nus, key=lambda z: (round(z.real, 12), z.imag))


class TestRoots:
    def test_reference_roots_golden(self):
        r = characteristic_roots(REF)
        assert r.nu1 == pytest.approx(-0.08922021231340574j, abs=1e-14)
        assert r.nu2 == pytest.approx(-0.8951871751523445 - 0.45538989384329714j, abs=1e-13)
        assert r.nu3 == pytest.approx(+0.8951871751523445 - 0.45538989384329714j, abs=1e-13)

    def test_root_sum_rule(self):
        for d in (0.2, 1.0, 4.0):
            cfg = TransferConfig(delta_in=d, omega0=1.0, omega1=0.3)
            total = sum(characteristic_roots(cfg).nus)
            assert total == pytest.approx(-1j * d, abs=1e-12)

    def test_all_roots_decay(self):
        for d in (0.2, 1.0, 1.95, 6.0):
            cfg = TransferConfig(delta_in=d, omega0=1.0, omega1=0.3)
            assert all(nu.imag < 0 for nu in characteristic_roots(cfg).nus)

    @pytest.mark.parametrize(
        "cfg",
        [
            TransferConfig(0.2, 1.0, 0.3),
            TransferConfig(1.0, 1.0, 0.3),
            TransferConfig(1.95, 1.0, 0.3),
            TransferConfig(6.0, 1.0, 0.3),
            TransferConfig(3.0, 0.5, 1.2),
        ],
    )
    def test_cardano_agrees_with_companion_solver(self, cfg):
        a = _sorted(characteristic_roots(cfg).nus)
        b = cardano_roots(cfg)
        scale = max(cfg.delta_in, cfg.omega0, cfg.omega1)
        assert max(abs(x - y) for x, y in zip(a, b)) < 1e-12 * scale

    def test_decoupled_target_factorizes(self):
        # omega1 = 0 leaves a root at the origin and the bare cavity pair
        r = characteristic_roots(TransferConfig(delta_in=1.0, omega0=1.0, omega1=0.0))
        nus = _sorted(r.nus)
        assert abs(nus[1]) < 1e-14
        disc = cmath.sqrt(complex(1.0 - 0.25))
        assert nus[0] == pytest.approx(-disc - 0.5j, abs=1e-12)
        assert nus[2] == pytest.approx(+disc - 0.5j, abs=1e-12)

    def test_all_real_rate_window(self):
        # narrow parameter strip where the oscillatory pair degenerates
        inside = characteristic_roots(TransferConfig(1.95, 1.0, 0.3))
        assert not inside.oscillatory
        with pytest.raises(DegenerateRootError, match="no oscillatory"):
            inside.s
        for d in (1.8, 2.1):
            assert characteristic_roots(TransferConfig(d, 1.0, 0.3)).oscillatory


class TestSelfMode:
    ROOTS = characteristic_roots(REF)

    def test_causality(self):
        assert response_kernel(self.ROOTS, -1.0) == 0j
        assert self_mode_values(self.ROOTS, -0.5) == 0.0
        phi = self_mode_values(self.ROOTS, np.array([-2.0, -0.1]))
        assert np.all(phi == 0.0)

    def test_kernel_initial_value(self):
        assert response_kernel(self.ROOTS, 0.0) == pytest.approx(1.0 + 0.0j, abs=1e-12)

    def test_mode_starts_at_zero_with_unit_slope(self):
        assert self_mode_values(self.ROOTS, 0.0) == pytest.approx(0.0, abs=1e-14)
        eps = 1e-7
        assert self_mode_values(self.ROOTS, eps) / eps == pytest.approx(1.0, rel=1e-5)

    def test_mode_is_running_integral_of_kernel(self):
        for t_end in (0.7, 3.0, 11.0):
            val, _ = quad(
                lambda t: response_kernel(self.ROOTS, t).real, 0.0, t_end, limit=200
            )
            assert val == pytest.approx(self_mode_values(self.ROOTS, t_end), abs=1e-9)
            imag, _ = quad(
                lambda t: response_kernel(self.ROOTS, t).imag, 0.0, t_end, limit=200
            )
            assert imag == pytest.approx(0.0, abs=1e-9)

    def test_trig_form_matches_residue_form(self):
        params = normalization(REF)
        ts = np.linspace(0.0, 30.0, 301)
        a = self_mode_values(self.ROOTS, ts)
        b = self_mode_trig(params, self.ROOTS, ts)
        assert np.max(np.abs(a - b)) < 1e-12

    def test_self_mode_entry_point(self):
        vals, params = self_mode(REF, np.array([0.5, 1.0]))
        assert vals.shape == (2,)
        assert params.oscillatory


class TestNormalization:
    def test_k_goldens(self):
        assert normalization(REF).K == pytest.approx(7.100555555555554, rel=1e-12)
        k55 = normalization(TransferConfig(5.5, 1.0, 0.3)).K
        assert k55 == pytest.approx(929.9046464646465, rel=1e-10)
        k6 = normalization(TransferConfig(6.0, 1.0, 0.3)).K
        assert k6 == pytest.approx(1206.0908333333323, rel=1e-10)

    def test_k_scale_covariance(self):
        # rescaling every rate by s divides the normalization sum by s
        k1 = normalization(TransferConfig(1.0, 1.0, 0.3)).K
        k2 = normalization(TransferConfig(2.0, 2.0, 0.6)).K
        assert k2 == pytest.approx(k1 / 2.0, rel=1e-10)

    def test_xi_from_k(self):
        params = normalization(REF)
        assert params.xi == pytest.approx(math.sqrt(2.0 / params.K), rel=1e-13)

    def test_amplitude_phase_golden(self):
        params = normalization(REF)
        assert math.tan(params.alpha) == pytest.approx(1.354483644451276, rel=1e-10)
        assert params.F == pytest.approx(1.0134477183337847, rel=1e-10)

    def test_spectrum_normalized_over_line(self):
        # Lorentzian-weighted mode density integrates to one; substitute
        # nu = delta*tan(theta) so the flat tail is handled exactly
        d = REF.delta_in

        def integrand(theta):
            nu = d * math.tan(theta)
            return abs(mode_spectrum(REF, nu)) ** 2 / math.pi

        val, _ = quad(integrand, -math.pi / 2, math.pi / 2, limit=200)
        assert val == pytest.approx(1.0, abs=1e-9)

    def test_spectrum_edge_values(self):
        params = normalization(REF)
        f0 = mode_spectrum(REF, 0.0)
        assert f0.real == pytest.approx(-params.xi * 1.0 / (2.0 * 0.3**2), rel=1e-12)
        assert abs(f0.imag) < 1e-12
        f_far = mode_spectrum(REF, 1e9)
        assert abs(f_far) == pytest.approx(params.xi / 2.0, rel=1e-6)

    def test_spectrum_refuses_pole(self):
        nu1 = characteristic_roots(REF).nu1
        with pytest.raises(SingularEvaluationError, match="evaluated at root"):
            mode_spectrum(REF, nu1)


class TestEfficiency:
    def test_q1_goldens(self):
        assert transfer_efficiency(
            TransferConfig(0.2, 1.0, 0.3), trace_points=2
        ).Q1 == pytest.approx(0.15809167446173245, rel=1e-9)
        assert transfer_efficiency(REF, trace_points=2).Q1 == pytest.approx(
            0.9295829747281099, rel=1e-9
        )
        assert transfer_efficiency(
            TransferConfig(6.0, 1.0, 0.3), trace_points=2
        ).Q1 == pytest.approx(0.9999309062734929, rel=1e-9)
        assert transfer_efficiency(
            TransferConfig(10.0, 1.0, 0.3), trace_points=2
        ).Q1 == pytest.approx(0.9999910162543881, rel=1e-9)

    def test_overlap_quadrature_matches_residue_form(self):
        res = transfer_efficiency(REF, trace_points=2)
        closed = overlap_integral_closed(characteristic_roots(REF))
        assert res.P1 == pytest.approx(closed, abs=1e-10)

    def test_efficiency_bounded(self):
        for d in (0.2, 1.0, 3.0, 10.0):
            q1 = transfer_efficiency(TransferConfig(d, 1.0, 0.3), trace_points=2).Q1
            assert 0.0 < q1 <= 1.0

    def test_zero_couplings_short_circuit(self):
        for cfg in (TransferConfig(1.0, 0.0, 0.3), TransferConfig(1.0, 1.0, 0.0)):
            res = transfer_efficiency(cfg, trace_points=11)
            assert res.Q1 == 0.0 and res.P1 == 0.0
            assert np.all(res.mode_trace[1] == 0.0)

    def test_horizon_scales_with_slowest_root(self):
        mus = characteristic_roots(REF).mus
        assert dephasing_horizon(REF) == pytest.approx(16.0 / min(m.real for m in mus))

    def test_field_trace_vanishes_at_focus(self):
        res = transfer_efficiency(REF)
        end_field = abs(res.field_trace[1][-1])
        dep = cavity_depopulation(REF)
        assert end_field == pytest.approx(dep, abs=1e-12)
        assert dep < 1e-10  # horizon long enough for full dephasing

    def test_depopulation_identity_mid_window(self):
        # |a(T)| = omega0*xi*Phi(T)^2/2 against the double-residue field trace,
        # well before dephasing completes
        for t_mid in (2.0, 4.0, 8.0):
            a_t = field_trace_values(REF, np.array([t_mid]), t_mid)[0]
            assert cavity_depopulation(REF, transfer_time=t_mid) == pytest.approx(
                abs(a_t), rel=1e-12
            )

    def test_depopulation_zero_couplings(self):
        assert cavity_depopulation(TransferConfig(1.0, 0.0, 0.3)) == 0.0
        assert cavity_depopulation(TransferConfig(1.0, 1.0, 0.0)) == 0.0


class TestReversal:
    def test_involution(self):
        snap = ReversalSnapshot(field=0.3 - 0.2j, detunings=(1.0, -2.0, 0.5))
        twice = time_reversal_map(time_reversal_map(snap))
        assert twice == snap

    def test_single_application(self):
        snap = ReversalSnapshot(field=1.0 + 1.0j, detunings=(0.7,))
        out = time_reversal_map(snap)
        assert out.field == -snap.field
        assert out.detunings == (-0.7,)
        assert out.direction == -1
