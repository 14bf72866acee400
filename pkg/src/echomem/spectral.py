"""Frequency-domain pipeline for the cavity-assisted memory.

Covers the dispersive pull of idle processing nodes, the cavity response,
the spectral storage-efficiency profile Z(nu), narrowband and mode-resolved
storage/retrieval efficiencies, the echo time trace, and both impedance
matching conditions (absorption matched to the cavity channels, broadening
tuned for a spectrally flat response).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .errors import (
    LevelNotAttainedError,
    ModeOverlapError,
    QuadratureError,
    SingularEvaluationError,
)
from .params import NetworkSpec, RateParams, SignalModeSpec, derived_quantities

QUAD_WINDOW_FACTOR = 40.0
MIN_MODE_SEPARATION = 10.0  # units of 1/width, gate for treating modes as distinct


# ---------------------------------------------------------------------------
# signal-mode profiles

def mode_amplitude(mode: SignalModeSpec, nu):
    """Spectral amplitude f(nu) of one signal mode, normalized to unit energy."""
    x = np.asarray(nu, dtype=float) - mode.center
    w = mode.width
    if mode.shape == "lorentzian":
        val = np.sqrt(2.0 * w**3 / np.pi) / (x**2 + w**2)
    elif mode.shape == "gaussian":
        val = (2.0 * np.pi * w**2) ** (-0.25) * np.exp(-(x**2) / (4.0 * w**2))
    else:
        raise ValueError(f"unknown mode shape {mode.shape!r}")
    return val if val.shape else float(val)


def mode_density(mode: SignalModeSpec, nu):
    """Spectral photon density |f(nu)|^2 (integrates to one)."""
    a = mode_amplitude(mode, nu)
    return a * a


def mode_time_profile(mode: SignalModeSpec, t):
    """Complex input-field envelope b(t) whose spectrum is mode_amplitude.

    Carries the center-frequency phase; |b|^2 integrates to mode.photons.
    """
    u = np.asarray(t, dtype=float) - mode.arrival_time
    w = mode.width
    if mode.shape == "lorentzian":
        env = np.sqrt(w) * np.exp(-w * np.abs(u))
    elif mode.shape == "gaussian":
        env = (2.0 * w**2 / np.pi) ** 0.25 * np.exp(-(w * u) ** 2)
    else:
        raise ValueError(f"unknown mode shape {mode.shape!r}")
    val = np.sqrt(mode.photons) * env * np.exp(-1j * mode.center * u)
    return val if val.shape else complex(val)


# ---------------------------------------------------------------------------
# dispersion of the processing nodes

@dataclass(frozen=True)
class DispersionData:
    """Dispersive sum of the idle nodes at one frequency plus its Taylor data at zero."""

    m_value: float
    pi_factor: float
    pi0: float
    pi_prime0: float


def dispersion_shift(net: NetworkSpec, nu: float) -> complex:
    """Complex frequency pull of the idle processing nodes at frequency nu."""
    g21 = net.rates.gamma21
    total = 0j
    for node in net.processors:
        gap = node.detuning - nu
        guard = max(g21 / 100.0, 1e-12 * max(abs(node.detuning), 1.0))
        if abs(gap) < guard and g21 == 0:
            raise SingularEvaluationError(
                f"dispersion evaluated at node pole: detuning {node.detuning}, nu {nu}"
            )
        total += node.omega**2 / (gap - 1j * g21)
    return total


def processing_dispersion(net: NetworkSpec, nu: float) -> DispersionData:
    """Real dispersive sum of the far-detuned nodes and the factor 1 + sum.

    Includes the zero-frequency Taylor data used by the flatness condition.
    Raises on evaluation at a node pole.
    """
    m_value = 0.0
    pi0 = 1.0
    pi_prime0 = 0.0
    for node in net.processors:
        gap = node.detuning - nu
        if abs(gap) <= 1e-12 * max(abs(node.detuning), 1.0):
            raise SingularEvaluationError(
                f"dispersion evaluated at node pole: detuning {node.detuning}, nu {nu}"
            )
        m_value += node.omega**2 / (node.detuning * gap)
        pi0 += node.omega**2 / node.detuning**2
        pi_prime0 += node.omega**2 / node.detuning**3
    return DispersionData(
        m_value=m_value, pi_factor=1.0 + m_value, pi0=pi0, pi_prime0=pi_prime0
    )


def _pi_array(net: NetworkSpec, nu: np.ndarray) -> np.ndarray:
    """Vectorized 1 + dispersive sum; node poles come out as +/-inf."""
    pi = np.ones_like(nu)
    with np.errstate(divide="ignore"):
        for node in net.processors:
            pi += node.omega**2 / (node.detuning * (node.detuning - nu))
    return pi


def _pole_mask(net: NetworkSpec, nu: np.ndarray) -> np.ndarray:
    mask = np.zeros(nu.shape, dtype=bool)
    for node in net.processors:
        mask |= np.abs(nu - node.detuning) <= 1e-12 * max(abs(node.detuning), 1.0)
    return mask


# ---------------------------------------------------------------------------
# cavity response and the spectral efficiency profile

def cavity_response(net: NetworkSpec, nu: float) -> complex:
    """Intracavity amplitude per unit input amplitude at frequency nu."""
    d = derived_quantities(net)
    r = net.rates
    pi = processing_dispersion(net, nu).pi_factor
    denom = r.gamma1 + r.gamma2 + d.gamma_tot / (1.0 - 1j * nu / d.delta_tot) - 2j * nu * pi
    return 2.0 * np.sqrt(r.gamma1) / denom


def _z_array(net: NetworkSpec, nu: np.ndarray) -> np.ndarray:
    """Spectral storage efficiency on a frequency grid; node poles map to 0."""
    d = derived_quantities(net)
    r = net.rates
    di = net.memory.delta_in
    pi = _pi_array(net, nu)
    with np.errstate(invalid="ignore"):
        denom = r.gamma1 + r.gamma2 + d.gamma_tot / (1.0 - 1j * nu / di) - 2j * nu * pi
        z = (di**2 / (di**2 + nu**2)) * 4.0 * r.gamma1 * d.gamma_tot / np.abs(denom) ** 2
    z[~np.isfinite(z)] = 0.0
    z[_pole_mask(net, nu)] = 0.0
    return z


def spectral_efficiency(net: NetworkSpec, nu: float) -> float:
    """Probability that a spectral component at nu is absorbed into the memory.

    At an exact node pole the dispersive pull diverges and the continuous
    limit is zero, which is what this returns there.
    """
    return float(_z_array(net, np.atleast_1d(float(nu)))[0])


def matched_form_efficiency(net: NetworkSpec, nu: float) -> float:
    """Alternative closed form of the efficiency profile, valid at matched absorption.

    Algebraically identical to spectral_efficiency when gamma_tot equals
    gamma1+gamma2; kept as an independent expression for cross-checking.
    """
    d = derived_quantities(net)
    r = net.rates
    di = net.memory.delta_in
    nu_arr = np.atleast_1d(float(nu))
    pi = _pi_array(net, nu_arr)[0]
    if not np.isfinite(pi):
        return 0.0
    gt = d.gamma_tot
    a = (nu**2 / (gt**2 * di**2)) * (0.25 * (gt - 2.0 * pi * di) ** 2 + pi**2 * nu**2)
    return float((r.gamma1 / gt) / (1.0 + a))


def narrowband_storage(rates: RateParams, gamma_tot: float) -> float:
    """Storage efficiency of a spectrally narrow pulse as a function of absorption rate."""
    channels = rates.gamma1 + rates.gamma2
    x = gamma_tot / channels
    return (rates.gamma1 / channels) * 4.0 * x / (1.0 + x) ** 2


@dataclass(frozen=True)
class SpectralResponse:
    """Sampled response: frequency grid, efficiency profile, complex cavity amplitude."""

    grid: np.ndarray
    z_values: np.ndarray
    response: np.ndarray

    def __post_init__(self):
        if not np.all(np.diff(self.grid) > 0):
            raise ValueError("frequency grid must be strictly increasing")
        if np.any(self.z_values < -1e-12) or np.any(self.z_values > 1.0 + 1e-12):
            raise ValueError("efficiency profile escapes [0, 1]")


def build_response(
    net: NetworkSpec,
    *,
    half_width: float | None = None,
    points: int = 4001,
    mode_widths: tuple[float, ...] = (),
) -> SpectralResponse:
    """Sample the response on a uniform grid.

    The default window is wide enough for the quadratures that ride on it,
    40x the largest rate in play.
    """
    if half_width is None:
        half_width = QUAD_WINDOW_FACTOR * max(
            net.rates.gamma1, net.memory.delta_in, *mode_widths, 0.0
        )
    grid = np.linspace(-half_width, half_width, points)
    z = _z_array(net, grid)
    d = derived_quantities(net)
    r = net.rates
    pi = _pi_array(net, grid)
    with np.errstate(invalid="ignore"):
        denom = (
            r.gamma1 + r.gamma2 + d.gamma_tot / (1.0 - 1j * grid / d.delta_tot) - 2j * grid * pi
        )
        resp = 2.0 * np.sqrt(r.gamma1) / denom
    resp[~np.isfinite(resp)] = 0.0
    return SpectralResponse(grid=grid, z_values=z, response=resp)


# ---------------------------------------------------------------------------
# efficiencies

@dataclass(frozen=True)
class EfficiencyReport:
    """Per-mode (storage, retrieval) pairs and their photon-weighted totals."""

    per_mode: tuple[tuple[float, float], ...]
    total_storage: float
    total_memory: float


def _quad_window(net: NetworkSpec, mode: SignalModeSpec) -> tuple[float, float, list[float]]:
    w = QUAD_WINDOW_FACTOR * max(mode.width, net.rates.gamma1, net.memory.delta_in)
    lo, hi = mode.center - w, mode.center + w
    pts = [mode.center, mode.center - mode.width, mode.center + mode.width, 0.0]
    pts += [p.detuning for p in net.processors]
    pts = sorted(p for p in set(pts) if lo < p < hi)
    return lo, hi, pts


def _checked_quad(fn, lo, hi, pts):
    val, err = quad(fn, lo, hi, points=pts, limit=500, epsabs=1e-10, epsrel=1e-9)
    if err > max(1e-7, 1e-5 * abs(val)):
        raise QuadratureError("efficiency quadrature did not converge", residual=err)
    return val


def storage_efficiency_mode(net: NetworkSpec, mode: SignalModeSpec) -> float:
    """Fraction of one signal mode's photons absorbed into the memory."""
    lo, hi, pts = _quad_window(net, mode)
    num = _checked_quad(lambda v: spectral_efficiency(net, v) * mode_density(mode, v), lo, hi, pts)
    den = _checked_quad(lambda v: mode_density(mode, v), lo, hi, pts)
    return num / den


def retrieval_efficiency_mode(net: NetworkSpec, mode: SignalModeSpec, tau: float) -> float:
    """End-to-end efficiency of one mode recalled by a detuning flip at time tau.

    The mode is filtered by the efficiency profile once on the way in and once
    on the way out, and decoheres for twice the storage interval.
    """
    if tau < mode.arrival_time:
        raise ValueError("recall time precedes the mode arrival")
    lo, hi, pts = _quad_window(net, mode)
    num = _checked_quad(
        lambda v: spectral_efficiency(net, v) ** 2 * mode_density(mode, v), lo, hi, pts
    )
    den = _checked_quad(lambda v: mode_density(mode, v), lo, hi, pts)
    decay = np.exp(-4.0 * net.rates.gamma21 * (tau - mode.arrival_time))
    return float(decay * num / den)


def _check_mode_separation(modes):
    for a, b in zip(modes, modes[1:]):
        gap = b.arrival_time - a.arrival_time
        need = MIN_MODE_SEPARATION / min(a.width, b.width)
        if gap < need:
            raise ModeOverlapError(
                f"modes at t={a.arrival_time} and t={b.arrival_time} overlap: "
                f"separation {gap:g} below {need:g}"
            )


def total_memory_efficiency(
    net: NetworkSpec, modes: tuple[SignalModeSpec, ...], tau: float
) -> EfficiencyReport:
    """Aggregate storage/retrieval over a train of non-overlapping modes."""
    if not modes:
        raise ValueError("at least one signal mode required")
    modes = tuple(modes)
    if any(b.arrival_time < a.arrival_time for a, b in zip(modes, modes[1:])):
        raise ValueError("modes must be sorted by arrival time")
    _check_mode_separation(modes)
    per = []
    for m in modes:
        per.append((storage_efficiency_mode(net, m), retrieval_efficiency_mode(net, m, tau)))
    weights = np.array([m.photons for m in modes])
    weights = weights / weights.sum()
    total_st = float(np.dot(weights, [p[0] for p in per]))
    total_mem = float(np.dot(weights, [p[1] for p in per]))
    return EfficiencyReport(per_mode=tuple(per), total_storage=total_st, total_memory=total_mem)


# ---------------------------------------------------------------------------
# echo trace

@dataclass(frozen=True)
class EchoTrace:
    times: np.ndarray
    amplitude: np.ndarray


def echo_time_trace(
    net: NetworkSpec,
    modes: tuple[SignalModeSpec, ...],
    tau: float,
    *,
    t_grid: np.ndarray | None = None,
    points: int = 16001,
) -> EchoTrace:
    """Complex echo amplitude after a detuning flip at time tau.

    Each stored mode re-emerges mirrored in time about tau (peak at
    2*tau - t_k) with its spectrum inverted about the carrier, filtered by
    the efficiency profile and damped by decoherence over the storage
    interval.
    """
    modes = tuple(modes)
    if not modes:
        raise ValueError("at least one signal mode required")
    wmax = max(m.width for m in modes)
    cmax = max(abs(m.center) for m in modes)
    half = QUAD_WINDOW_FACTOR * wmax + 2.0 * cmax
    nu = np.linspace(-half, half, points)
    dnu = nu[1] - nu[0]
    z = _z_array(net, nu)
    if t_grid is None:
        peaks = [2.0 * tau - m.arrival_time for m in modes]
        pad = 8.0 / min(m.width for m in modes)
        t_grid = np.linspace(min(peaks) - pad, max(peaks) + pad, 4001)
    g21 = net.rates.gamma21
    amp = np.zeros(t_grid.shape, dtype=complex)
    for m in modes:
        spectrum = z * mode_amplitude(m, nu) * np.sqrt(m.photons)
        phase = np.exp(1j * np.outer(t_grid + m.arrival_time - 2.0 * tau, nu))
        amp += -(dnu / np.sqrt(2.0 * np.pi)) * phase @ spectrum
    amp *= np.exp(-2.0 * g21 * np.clip(t_grid - tau, 0.0, None))
    return EchoTrace(times=t_grid, amplitude=amp)


# ---------------------------------------------------------------------------
# matching conditions and bandwidth

def optimal_broadening(net: NetworkSpec) -> float:
    """Inhomogeneous width that flattens the efficiency profile at the carrier."""
    d = derived_quantities(net)
    pi0 = processing_dispersion(net, 0.0).pi0
    return d.gamma_tot / (2.0 * pi0)


def bandwidth_metric(resp: SpectralResponse, level: float) -> float:
    """Full width of the contiguous band around nu=0 where the squared profile stays >= level.

    Crossing positions are linearly interpolated between grid points; a band
    reaching the grid edge is truncated there.
    """
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie strictly between 0 and 1")
    z2 = resp.z_values**2
    center = int(np.argmin(np.abs(resp.grid)))
    if z2[center] < level:
        raise LevelNotAttainedError(f"profile below level {level} already at nu=0")

    def crossing(indices, fallback):
        prev = center
        for i in indices:
            if z2[i] < level:
                frac = (z2[prev] - level) / (z2[prev] - z2[i])
                return resp.grid[prev] + frac * (resp.grid[i] - resp.grid[prev])
            prev = i
        return resp.grid[fallback]

    right = crossing(range(center + 1, len(z2)), -1)
    left = crossing(range(center - 1, -1, -1), 0)
    return float(right - left)


def rebalance_detunings(net: NetworkSpec) -> NetworkSpec:
    """Shift all node detunings by a common offset so the static pull vanishes.

    Solves for the offset that zeroes the real part of the zero-frequency
    dispersion shift; symmetric layouts come back (numerically) unchanged.
    """
    if not net.processors:
        return net
    g21 = net.rates.gamma21

    def static_pull(x):
        return sum(
            p.omega**2 * (p.detuning + x) / ((p.detuning + x) ** 2 + g21**2)
            for p in net.processors
        )

    span = 0.45 * min(abs(p.detuning) for p in net.processors)
    if static_pull(-span) * static_pull(span) > 0:
        raise ValueError("static pull does not change sign in the search bracket")
    shift = brentq(static_pull, -span, span, xtol=1e-14)
    moved = tuple(
        type(p)(detuning=p.detuning + shift, omega=p.omega) for p in net.processors
    )
    return NetworkSpec(rates=net.rates, memory=net.memory, processors=moved)
