"""Frequency-domain pipeline: mode profiles, dispersion, response, efficiencies."""

import numpy as np
import pytest
from scipy.integrate import quad

from echomem import (
    EchoTrace,
    LevelNotAttainedError,
    MemoryNodeSpec,
    ModeOverlapError,
    NetworkSpec,
    ProcessingNodeSpec,
    RateParams,
    SignalModeSpec,
    SingularEvaluationError,
    SpectralResponse,
    bandwidth_metric,
    build_response,
    cavity_response,
    derived_quantities,
    dispersion_shift,
    echo_time_trace,
    matched_network,
    mode_amplitude,
    mode_density,
    mode_time_profile,
    narrowband_storage,
    optimal_broadening,
    processing_dispersion,
    rebalance_detunings,
    retrieval_efficiency_mode,
    spectral_efficiency,
    storage_efficiency_mode,
    total_memory_efficiency,
)

MATCHED_BARE = matched_network(0)


class TestModeProfiles:
    @pytest.mark.parametrize("shape", ["lorentzian", "gaussian"])
    def test_spectrum_unit_energy(self, shape):
        mode = SignalModeSpec(arrival_time=0.0, width=0.3, shape=shape, center=0.7)
        val, _ = quad(lambda nu: mode_density(mode, nu), -np.inf, np.inf, limit=200)
        assert val == pytest.approx(1.0, abs=1e-9)

    @pytest.mark.parametrize("shape", ["lorentzian", "gaussian"])
    def test_time_energy_counts_photons(self, shape):
        mode = SignalModeSpec(arrival_time=2.0, width=0.3, shape=shape, photons=2.5)
        val, _ = quad(lambda t: abs(mode_time_profile(mode, t)) ** 2, -np.inf, np.inf, limit=200)
        assert val == pytest.approx(2.5, abs=1e-8)

    @pytest.mark.parametrize("shape", ["lorentzian", "gaussian"])
    def test_time_profile_transforms_to_spectrum(self, shape):
        # numeric e^{+i nu t} transform of b(t) must land on f(nu)
        mode = SignalModeSpec(arrival_time=0.0, width=0.4, shape=shape, center=0.3)
        t = np.linspace(-60.0, 60.0, 120001)
        b = mode_time_profile(mode, t)
        for nu in (0.0, 0.3, 0.9):
            ft = np.trapezoid(b * np.exp(1j * nu * t), t) / np.sqrt(2.0 * np.pi)
            assert ft == pytest.approx(mode_amplitude(mode, nu), abs=2e-6)

    def test_unknown_shape_rejected(self):
        mode = SignalModeSpec(arrival_time=0.0, width=0.3, shape="sech")
        with pytest.raises(ValueError, match="unknown mode shape"):
            mode_amplitude(mode, 0.0)
        with pytest.raises(ValueError, match="unknown mode shape"):
            mode_time_profile(mode, 0.0)


class TestDispersion:
    NET = matched_network(4, node_delta=3.0, omega_ratio=0.25)

    def test_symmetric_layout_is_even(self):
        for nu in (0.3, 1.1, 2.4):
            left = processing_dispersion(self.NET, -nu).pi_factor
            right = processing_dispersion(self.NET, +nu).pi_factor
            assert left == pytest.approx(right, rel=1e-14)

    def test_taylor_data(self):
        data = processing_dispersion(self.NET, 0.0)
        assert data.pi0 == pytest.approx(1.0 + 4 * 0.25**2)
        assert data.pi_prime0 == pytest.approx(0.0, abs=1e-15)
        assert data.pi_factor == pytest.approx(data.pi0)

    def test_pole_raises(self):
        with pytest.raises(SingularEvaluationError, match="node pole"):
            processing_dispersion(self.NET, 3.0)
        with pytest.raises(SingularEvaluationError, match="node pole"):
            dispersion_shift(self.NET, 3.0)

    def test_linewidth_regularizes_pole(self):
        net = NetworkSpec(
            rates=RateParams(gamma1=1.0, gamma21=0.05),
            memory=self.NET.memory,
            processors=self.NET.processors,
        )
        val = dispersion_shift(net, 3.0)
        assert np.isfinite(val.real) and np.isfinite(val.imag)


class TestResponseProfile:
    def test_matched_peak_unity(self):
        for m in (0, 2, 4):
            assert spectral_efficiency(matched_network(m), 0.0) == pytest.approx(1.0, abs=1e-12)

    def test_bare_matched_closed_form(self):
        # gamma_tot = gamma1 = 1, delta_in = 1/2 collapses to 1/(1 + 4 nu^4)
        for nu in (0.0, 0.17, 0.5, 1.3, 3.0):
            expect = 1.0 / (1.0 + 4.0 * nu**4)
            assert spectral_efficiency(MATCHED_BARE, nu) == pytest.approx(expect, rel=1e-12)

    def test_cavity_response_on_resonance(self):
        assert cavity_response(MATCHED_BARE, 0.0) == pytest.approx(1.0 + 0.0j, abs=1e-14)

    def test_node_pole_maps_to_zero(self):
        net = matched_network(2, node_delta=3.0)
        assert spectral_efficiency(net, 3.0) == 0.0

    def test_build_response_window(self):
        resp = build_response(MATCHED_BARE, points=801)
        assert resp.grid[0] == -40.0 and resp.grid[-1] == 40.0
        assert resp.z_values.max() <= 1.0 + 1e-12

    def test_response_validation(self):
        with pytest.raises(ValueError, match="strictly increasing"):
            SpectralResponse(
                grid=np.array([0.0, -1.0]),
                z_values=np.zeros(2),
                response=np.zeros(2, dtype=complex),
            )
        with pytest.raises(ValueError, match="escapes"):
            SpectralResponse(
                grid=np.array([0.0, 1.0]),
                z_values=np.array([0.5, 1.5]),
                response=np.zeros(2, dtype=complex),
            )


class TestNarrowband:
    def test_matched_absorption_is_lossless_peak(self):
        rates = RateParams(gamma1=1.0)
        assert narrowband_storage(rates, 1.0) == pytest.approx(1.0)

    def test_half_matched_value(self):
        rates = RateParams(gamma1=1.0)
        assert narrowband_storage(rates, 0.5) == pytest.approx(8.0 / 9.0)

    def test_mismatch_symmetry(self):
        # 4x/(1+x)^2 is invariant under x -> 1/x
        rates = RateParams(gamma1=1.0)
        assert narrowband_storage(rates, 2.0) == pytest.approx(narrowband_storage(rates, 0.5))

    def test_free_space_loss_scales_peak(self):
        rates = RateParams(gamma1=1.0, gamma2=0.5)
        assert narrowband_storage(rates, 1.5) == pytest.approx(1.0 / 1.5)


class TestModeEfficiencies:
    def test_narrow_mode_approaches_peak(self):
        mode = SignalModeSpec(arrival_time=0.0, width=0.005)
        assert storage_efficiency_mode(MATCHED_BARE, mode) == pytest.approx(1.0, abs=1e-3)

    def test_wider_modes_store_worse(self):
        widths = [0.01, 0.1, 0.4, 1.0]
        effs = [
            storage_efficiency_mode(MATCHED_BARE, SignalModeSpec(arrival_time=0.0, width=w))
            for w in widths
        ]
        assert all(a > b for a, b in zip(effs, effs[1:]))

    def test_retrieval_decay_factor(self):
        net = matched_network(0, gamma21=0.01)
        mode = SignalModeSpec(arrival_time=0.0, width=0.05)
        e1 = retrieval_efficiency_mode(net, mode, tau=10.0)
        e2 = retrieval_efficiency_mode(net, mode, tau=25.0)
        assert e2 / e1 == pytest.approx(np.exp(-4.0 * 0.01 * 15.0), rel=1e-9)

    def test_recall_before_arrival_rejected(self):
        mode = SignalModeSpec(arrival_time=5.0, width=0.05)
        with pytest.raises(ValueError, match="recall time precedes"):
            retrieval_efficiency_mode(MATCHED_BARE, mode, tau=4.0)

    def test_total_memory_weighting(self):
        modes = (
            SignalModeSpec(arrival_time=0.0, width=0.05, photons=1.0),
            SignalModeSpec(arrival_time=400.0, width=0.05, center=0.4, photons=3.0),
        )
        report = total_memory_efficiency(MATCHED_BARE, modes, tau=800.0)
        per = [p[0] for p in report.per_mode]
        assert report.total_storage == pytest.approx((per[0] + 3.0 * per[1]) / 4.0)
        assert per[0] > per[1]  # detuned mode sits off the response peak

    def test_total_memory_input_validation(self):
        with pytest.raises(ValueError, match="at least one signal mode"):
            total_memory_efficiency(MATCHED_BARE, (), tau=1.0)
        modes = (
            SignalModeSpec(arrival_time=10.0, width=0.05),
            SignalModeSpec(arrival_time=0.0, width=0.05),
        )
        with pytest.raises(ValueError, match="sorted by arrival"):
            total_memory_efficiency(MATCHED_BARE, modes, tau=100.0)

    def test_overlapping_modes_rejected(self):
        modes = (
            SignalModeSpec(arrival_time=0.0, width=0.05),
            SignalModeSpec(arrival_time=50.0, width=0.05),
        )
        with pytest.raises(ModeOverlapError, match="overlap"):
            total_memory_efficiency(MATCHED_BARE, modes, tau=100.0)


class TestEchoTrace:
    def test_requires_modes(self):
        with pytest.raises(ValueError, match="at least one signal mode"):
            echo_time_trace(MATCHED_BARE, (), tau=10.0)

    def test_echo_mirrors_about_flip(self):
        mode = SignalModeSpec(arrival_time=5.0, width=0.1)
        tau = 100.0
        trace = echo_time_trace(MATCHED_BARE, (mode,), tau)
        assert isinstance(trace, EchoTrace)
        peak = trace.times[np.argmax(np.abs(trace.amplitude))]
        assert peak == pytest.approx(2.0 * tau - 5.0, abs=0.1)

    def test_echo_energy_matches_retrieval(self):
        mode = SignalModeSpec(arrival_time=0.0, width=0.1)
        tau = 100.0
        trace = echo_time_trace(MATCHED_BARE, (mode,), tau)
        energy = np.trapezoid(np.abs(trace.amplitude) ** 2, trace.times)
        expect = retrieval_efficiency_mode(MATCHED_BARE, mode, tau)
        assert energy == pytest.approx(expect, rel=1e-2)

    def test_two_mode_echo_orders_reversed(self):
        modes = (
            SignalModeSpec(arrival_time=0.0, width=0.1),
            SignalModeSpec(arrival_time=200.0, width=0.1),
        )
        tau = 300.0
        trace = echo_time_trace(MATCHED_BARE, modes, tau)
        mag = np.abs(trace.amplitude)
        # first-in mode comes back last
        late = trace.times > 500.0
        early = ~late
        t_first = trace.times[early][np.argmax(mag[early])]
        t_second = trace.times[late][np.argmax(mag[late])]
        assert t_second == pytest.approx(600.0, abs=0.3)
        assert t_first == pytest.approx(400.0, abs=0.3)


class TestMatching:
    def test_optimal_broadening_values(self):
        assert optimal_broadening(matched_network(0)) == pytest.approx(0.5)
        assert optimal_broadening(matched_network(4)) == pytest.approx(0.4)
        assert optimal_broadening(
            matched_network(4, omega_ratio=0.4)
        ) == pytest.approx(0.3048780487804878)

    def test_bandwidth_golden(self):
        resp = build_response(MATCHED_BARE, half_width=2.0, points=4001)
        assert bandwidth_metric(resp, 0.99) == pytest.approx(0.37676565248694804, rel=1e-12)

    def test_bandwidth_level_validation(self):
        resp = build_response(MATCHED_BARE, points=801)
        for bad in (0.0, 1.0, -0.2, 1.7):
            with pytest.raises(ValueError, match="strictly between"):
                bandwidth_metric(resp, bad)

    def test_unattained_level(self):
        resp = build_response(matched_network(0, gamma_tot=0.2), points=801)
        with pytest.raises(LevelNotAttainedError, match="already at nu=0"):
            bandwidth_metric(resp, 0.99)


class TestRebalance:
    def test_symmetric_layout_unchanged(self):
        net = matched_network(4)
        out = rebalance_detunings(net)
        before = [p.detuning for p in net.processors]
        after = [p.detuning for p in out.processors]
        assert after == pytest.approx(before, abs=1e-12)

    def test_asymmetric_layout_zeroed(self):
        net = NetworkSpec(
            rates=RateParams(gamma1=1.0),
            memory=MemoryNodeSpec(delta_in=0.5, omega0=0.5),
            processors=(
                ProcessingNodeSpec(detuning=3.1, omega=0.8),
                ProcessingNodeSpec(detuning=-2.9, omega=0.8),
            ),
        )
        out = rebalance_detunings(net)
        pull = sum(p.omega**2 / p.detuning for p in out.processors)
        assert pull == pytest.approx(0.0, abs=1e-10)

    def test_no_processors_is_identity(self):
        assert rebalance_detunings(MATCHED_BARE) is MATCHED_BARE

    def test_one_sided_layout_rejected(self):
        net = NetworkSpec(
            rates=RateParams(gamma1=1.0),
            memory=MemoryNodeSpec(delta_in=0.5, omega0=0.5),
            processors=(
                ProcessingNodeSpec(detuning=3.0, omega=0.8),
                ProcessingNodeSpec(detuning=4.0, omega=0.8),
            ),
        )
        with pytest.raises(ValueError, match="does not change sign"):
            rebalance_detunings(net)
