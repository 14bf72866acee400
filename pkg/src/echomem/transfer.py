"""Analytic transfer dynamics between the memory node and a resonant processing node.

The rephased collective coherence drives the cavity, which feeds the target
node; eliminating the cavity gives a causal response kernel whose poles are
the roots of a cubic. Everything here (kernel, self-mode shape, normalization,
overlap, efficiency, field trace) is closed-form residue calculus on those
roots, with quadrature used where an integral is the defining statement.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import quad

from .errors import (
    DegenerateRootError,
    NormalizationError,
    QuadratureError,
    RootFindingError,
    SingularEvaluationError,
)


@dataclass(frozen=True)
class TransferConfig:
    """Memory-node width and the two collective couplings; target node at zero detuning."""

    delta_in: float
    omega0: float
    omega1: float


@dataclass(frozen=True)
class CubicRoots:
    """Labeled roots of the characteristic cubic plus solve intermediates.

    nu1 is purely imaginary; nu2/nu3 form the mirror pair -S-i*n / +S-i*n
    when the oscillatory pair exists. In the narrow parameter window where
    all three damping rates are real, s_squared goes negative and the
    nu2/nu3 labels order the pair by imaginary part instead.
    """

    nu1: complex
    nu2: complex
    nu3: complex
    p: float
    q: float
    b: float
    n: float
    s_squared: float
    delta_in: float
    omega0: float
    omega1: float

    @property
    def nus(self) -> tuple[complex, complex, complex]:
        return (self.nu1, self.nu2, self.nu3)

    @property
    def mus(self) -> tuple[complex, complex, complex]:
        """Damping-rate picture of the roots (positive real parts decay)."""
        return tuple(1j * nu for nu in self.nus)

    @property
    def s(self) -> float:
        if self.s_squared <= 0:
            raise DegenerateRootError("no oscillatory root pair for these parameters")
        return math.sqrt(self.s_squared)

    @property
    def oscillatory(self) -> bool:
        return self.s_squared > 0


def _char_poly(cfg: TransferConfig, x: complex) -> complex:
    w = cfg.omega0**2 + cfg.omega1**2
    return x**3 + 1j * cfg.delta_in * x**2 - w * x - 1j * cfg.omega1**2 * cfg.delta_in


def _char_poly_deriv(cfg: TransferConfig, x: complex) -> complex:
    w = cfg.omega0**2 + cfg.omega1**2
    return 3.0 * x**2 + 2j * cfg.delta_in * x - w


def _scale(cfg: TransferConfig) -> float:
    return max(cfg.delta_in, cfg.omega0, cfg.omega1, 1e-30)


def _label_roots(cfg: TransferConfig, raw: np.ndarray) -> CubicRoots:
    mus = 1j * raw
    scale = _scale(cfg)
    real_mask = np.abs(mus.imag) <= 1e-9 * scale
    if real_mask.sum() == 1:
        mu1 = complex(mus[real_mask][0].real)
        pair = mus[~real_mask]
    elif real_mask.sum() == 3:
        r = np.sort(mus.real)
        # the isolated root keeps the mu1 label; the close pair plays the
        # (degenerating) oscillatory pair
        if r[1] - r[0] > r[2] - r[1]:
            mu1, pair = complex(r[0]), np.array([r[1], r[2]], dtype=complex)
        else:
            mu1, pair = complex(r[2]), np.array([r[0], r[1]], dtype=complex)
    else:
        order = np.argsort(np.abs(mus.imag))
        mu1 = complex(mus[order[0]])
        pair = mus[order[1:]]
    n = float(pair.real.mean())
    half_gap = (pair[0] - pair[1]) / 2.0
    s_squared = float((-(half_gap**2)).real)
    pair = pair[np.argsort(pair.imag)]  # mu2 = n - i*S first
    w = cfg.omega0**2 + cfg.omega1**2
    p = w - cfg.delta_in**2 / 3.0
    q = 2.0 * cfg.delta_in**3 / 27.0 - (cfg.omega0**2 - 2.0 * cfg.omega1**2) * cfg.delta_in / 3.0
    return CubicRoots(
        nu1=-1j * mu1,
        nu2=-1j * complex(pair[0]),
        nu3=-1j * complex(pair[1]),
        p=p,
        q=q,
        b=cfg.delta_in - 3.0 * n,
        n=n,
        s_squared=s_squared,
        delta_in=cfg.delta_in,
        omega0=cfg.omega0,
        omega1=cfg.omega1,
    )


@lru_cache(maxsize=256)
def characteristic_roots(cfg: TransferConfig) -> CubicRoots:
    """Solve the characteristic cubic of the cavity-mediated transfer.

    Production path is the companion-matrix solver with a Newton polish;
    cardano_roots provides the closed-form cross-check. Zero couplings are
    handled by direct factorization.
    """
    d, o0, o1 = cfg.delta_in, cfg.omega0, cfg.omega1
    if o1 == 0.0:
        disc = cmath.sqrt(-(d**2) + 4.0 * o0**2)
        raw = np.array([0.0, (-1j * d - disc) / 2.0, (-1j * d + disc) / 2.0])
    else:
        raw = np.roots([1.0, 1j * d, -(o0**2 + o1**2), -1j * o1**2 * d])
        for _ in range(2):
            raw = raw - _char_poly(cfg, raw) / _char_poly_deriv(cfg, raw)
    roots = _label_roots(cfg, raw)
    scale = _scale(cfg)
    residuals = [abs(_char_poly(cfg, nu)) for nu in roots.nus]
    if max(residuals) > 1e-10 * scale**3:
        raise RootFindingError("root polish left large residuals", residuals=residuals)
    if abs(sum(roots.nus) + 1j * d) > 1e-12 * max(scale, 1.0):
        raise RootFindingError("root sum rule violated", residuals=residuals)
    if min(d, o0, o1) > 0 and not all(nu.imag < 0 for nu in roots.nus):
        raise RootFindingError("non-decaying root for positive couplings", residuals=residuals)
    return roots


def cardano_roots(cfg: TransferConfig) -> tuple[complex, complex, complex]:
    """Closed-form roots via the trigonometric/hyperbolic branch formulas.

    Works on the real depressed cubic of the damping rates: y^3 + p*y = q
    after mu = y + delta_in/3. Returned unlabeled, sorted by (real, imag).
    """
    d = cfg.delta_in
    roots = characteristic_roots(cfg)  # for p, q only; the solve below is independent
    p, q = roots.p, roots.q
    if p == 0.0:
        y1 = math.copysign(abs(q) ** (1.0 / 3.0), q)
    elif p > 0:
        arg = 1.5 * q / p * math.sqrt(3.0 / p)
        y1 = 2.0 * math.sqrt(p / 3.0) * math.sinh(math.asinh(arg) / 3.0)
    else:
        arg = 1.5 * q / p * math.sqrt(-3.0 / p)
        if abs(arg) <= 1.0:
            y1 = 2.0 * math.sqrt(-p / 3.0) * math.cos(math.acos(-arg) / 3.0)
        else:
            y1 = -2.0 * math.copysign(1.0, arg) * math.sqrt(-p / 3.0) * math.cosh(
                math.acosh(abs(arg)) / 3.0
            )
    # deflate: y^3 + p*y - q = (y - y1)(y^2 + y1*y + (y1^2 + p))
    disc = cmath.sqrt(-3.0 * y1**2 - 4.0 * p)
    y2 = (-y1 - disc) / 2.0
    y3 = (-y1 + disc) / 2.0
    nus = [-1j * (y + d / 3.0) for y in (y1, y2, y3)]
    return tuple(sorted(nus, key=lambda z: (round(z.real, 12), z.imag)))


# ---------------------------------------------------------------------------
# residue building blocks

def _residue_data(roots: CubicRoots):
    mus = np.array(roots.mus)
    scale = max(abs(mus).max(), 1e-30)
    denom = np.empty(3, dtype=complex)
    for a in range(3):
        others = np.delete(mus, a)
        gaps = mus[a] - others
        if np.min(np.abs(gaps)) < 1e-9 * scale:
            raise DegenerateRootError("repeated characteristic roots")
        denom[a] = np.prod(gaps)
    phi_res = (roots.delta_in - mus) / denom
    gamma_res = -mus * (roots.delta_in - mus) / denom
    return mus, phi_res, gamma_res


def response_kernel(roots: CubicRoots, tau) -> complex | np.ndarray:
    """Causal kernel giving the cavity field driven by the rephasing coherence.

    Zero for tau < 0; a three-exponential residue sum for tau >= 0 with
    unit initial value.
    """
    mus, _, gamma_res = _residue_data(roots)
    t = np.asarray(tau, dtype=float)
    out = np.zeros(t.shape, dtype=complex)
    pos = t >= 0
    if np.any(pos):
        out[pos] = np.exp(-np.outer(t[pos], mus)) @ gamma_res
    return out if out.shape else complex(out)


def self_mode_values(roots: CubicRoots, tau) -> np.ndarray:
    """Temporal self-mode, the running integral of the response kernel. Real; 0 for tau < 0."""
    mus, phi_res, _ = _residue_data(roots)
    t = np.asarray(tau, dtype=float)
    out = np.zeros(t.shape, dtype=float)
    pos = t >= 0
    if np.any(pos):
        vals = np.exp(-np.outer(t[pos], mus)) @ phi_res
        out[pos] = vals.real
    return out if out.shape else float(out)


def self_mode_trig(params: SelfModeParams, roots: CubicRoots, tau) -> np.ndarray:
    """Damped-sine closed form of the self-mode; only exists off the all-real-root window."""
    s = roots.s  # raises when the pair is not oscillatory
    d, n, b = roots.delta_in, roots.n, roots.b
    t = np.asarray(tau, dtype=float)
    out = np.zeros(t.shape, dtype=float)
    pos = t >= 0
    pref = params.F / (s * (b**2 + s**2))
    out[pos] = pref * (
        np.sin(params.alpha - s * t[pos]) * np.exp(-n * t[pos])
        - math.sin(params.alpha) * np.exp(-(d - 2.0 * n) * t[pos])
    )
    return out if out.shape else float(out)


@dataclass(frozen=True)
class SelfModeParams:
    """Amplitude/phase constants of the self-mode and its spectral normalization."""

    F: float
    alpha: float
    xi: float
    K: float
    oscillatory: bool


def normalization(cfg: TransferConfig, roots: CubicRoots | None = None) -> SelfModeParams:
    """Normalizing constants of the self-mode spectrum.

    K is a residue sum that must come out real positive; its square root
    fixes xi so the Lorentzian-weighted mode density integrates to one.
    Works in collective units (atom number absorbed into the couplings).
    """
    if roots is None:
        roots = characteristic_roots(cfg)
    nus = np.array(roots.nus)
    d = roots.delta_in
    k_val = 0j
    for idx in range(3):
        nu_n = nus[idx]
        others = np.delete(nus, idx)
        denom = np.prod(nu_n - others) * np.prod(nu_n - np.conj(nus))
        k_val += (nu_n**2 + d**2) ** 2 / denom
    k_val *= -1j
    if abs(k_val.imag) > 1e-8 * abs(k_val):
        raise NormalizationError(
            f"normalization sum has spurious imaginary part {k_val.imag:g} "
            "(check root labeling)"
        )
    k_real = float(k_val.real)
    if k_real <= 0:
        raise NormalizationError(f"normalization sum not positive: {k_real:g}")
    xi = math.sqrt(2.0 * d / k_real)
    if roots.s_squared > 0:
        s, n, b = math.sqrt(roots.s_squared), roots.n, roots.b
        p_big = s**2 + b * (d - n)
        q_big = -2.0 * n * s
        f_amp = math.hypot(p_big, q_big)
        alpha = math.atan2(q_big, -p_big)
        return SelfModeParams(F=f_amp, alpha=alpha, xi=xi, K=k_real, oscillatory=True)
    return SelfModeParams(F=math.nan, alpha=math.nan, xi=xi, K=k_real, oscillatory=False)


@lru_cache(maxsize=256)
def _cached_params(cfg: TransferConfig) -> SelfModeParams:
    return normalization(cfg, characteristic_roots(cfg))


def self_mode(cfg: TransferConfig, tau) -> tuple[np.ndarray, SelfModeParams]:
    """Self-mode value(s) at tau plus the associated constants."""
    roots = characteristic_roots(cfg)
    return self_mode_values(roots, tau), _cached_params(cfg)


def mode_spectrum(cfg: TransferConfig, nu) -> complex | np.ndarray:
    """Spectral amplitude of the self-mode over the memory ensemble."""
    roots = characteristic_roots(cfg)
    params = _cached_params(cfg)
    d = cfg.delta_in
    x = np.asarray(nu, dtype=complex)
    scale = _scale(cfg)
    denom = np.ones_like(x)
    for nu_m in roots.nus:
        gap = x - nu_m
        if np.any(np.abs(gap) < 1e-12 * scale):
            raise SingularEvaluationError(f"mode spectrum evaluated at root {nu_m}")
        denom = denom * gap
    val = params.xi * (x + 1j * d) * (x**2 + d**2) / (2.0 * d * denom)
    return val if val.shape else complex(val)


def dephasing_horizon(cfg: TransferConfig) -> float:
    """Time for the self-mode to decay to a negligible level (16 slowest-rate lifetimes)."""
    mus = characteristic_roots(cfg).mus
    slowest = min(mu.real for mu in mus)
    return 16.0 / slowest


def overlap_integral_closed(roots: CubicRoots) -> float:
    """Closed form of the squared self-mode integral via pairwise residue sums."""
    mus, phi_res, _ = _residue_data(roots)
    total = 0j
    for a in range(3):
        for b in range(3):
            total += phi_res[a] * phi_res[b] / (mus[a] + mus[b])
    return float(total.real)


@dataclass(frozen=True)
class TransferResult:
    """Overlap, efficiency, and sampled traces of one transfer run."""

    P1: float
    Q1: float
    mode_trace: tuple[np.ndarray, np.ndarray]
    field_trace: tuple[np.ndarray, np.ndarray]
    roots: CubicRoots
    params: SelfModeParams
    transfer_time: float


def field_trace_values(cfg: TransferConfig, times, transfer_time: float) -> np.ndarray:
    """Cavity amplitude while the rephasing coherence (focusing at transfer_time) drives it."""
    roots = characteristic_roots(cfg)
    params = _cached_params(cfg)
    mus, phi_res, gamma_res = _residue_data(roots)
    t = np.asarray(times, dtype=float)
    pref = cfg.omega0 * params.xi
    out = np.zeros(t.shape, dtype=complex)
    inside = (t >= 0) & (t <= transfer_time)
    tt = t[inside]
    acc = np.zeros(tt.shape, dtype=complex)
    for a in range(3):
        for b in range(3):
            pair = mus[a] + mus[b]
            acc += (
                gamma_res[a]
                * phi_res[b]
                * np.exp(-mus[b] * (transfer_time - tt))
                * (1.0 - np.exp(-pair * tt))
                / pair
            )
    out[inside] = pref * acc
    return out if out.shape else complex(out)


def cavity_depopulation(cfg: TransferConfig, *, transfer_time: float | None = None) -> float:
    """Residual cavity amplitude at the rephasing instant.

    Approaches zero as the dephasing window grows; reported as a diagnostic,
    not asserted to vanish.
    """
    if cfg.omega0 == 0.0 or cfg.omega1 == 0.0:
        return 0.0
    if transfer_time is None:
        transfer_time = dephasing_horizon(cfg)
    roots = characteristic_roots(cfg)
    params = _cached_params(cfg)
    phi_end = self_mode_values(roots, transfer_time)
    return float(abs(cfg.omega0 * params.xi * 0.5 * phi_end**2))


def transfer_efficiency(cfg: TransferConfig, *, trace_points: int = 2001) -> TransferResult:
    """Overlap integral and transfer efficiency into the resonant node.

    The overlap is evaluated by adaptive quadrature of the squared self-mode
    (the closed residue form is kept separate as a cross-check).
    """
    roots = characteristic_roots(cfg)
    if cfg.omega1 == 0.0 or cfg.omega0 == 0.0:
        placeholder = SelfModeParams(
            F=math.nan, alpha=math.nan, xi=math.nan, K=math.nan, oscillatory=False
        )
        horizon = 16.0 / cfg.delta_in if cfg.delta_in > 0 else 1.0
        tgrid = np.linspace(0.0, horizon, trace_points)
        zeros = np.zeros_like(tgrid)
        return TransferResult(
            P1=0.0,
            Q1=0.0,
            mode_trace=(tgrid, zeros),
            field_trace=(tgrid, zeros.astype(complex)),
            roots=roots,
            params=placeholder,
            transfer_time=horizon,
        )
    params = _cached_params(cfg)
    p1, err = quad(
        lambda t: self_mode_values(roots, t) ** 2, 0.0, np.inf, limit=500, epsabs=1e-12
    )
    if err > max(1e-9, 1e-6 * abs(p1)):
        raise QuadratureError("self-mode overlap quadrature did not converge", residual=err)
    q1 = (2.0 * cfg.delta_in / params.K) * cfg.omega0**2 * cfg.omega1**2 * p1**2
    horizon = dephasing_horizon(cfg)
    tgrid = np.linspace(0.0, horizon, trace_points)
    return TransferResult(
        P1=float(p1),
        Q1=float(q1),
        mode_trace=(tgrid, self_mode_values(roots, tgrid)),
        field_trace=(tgrid, field_trace_values(cfg, tgrid, horizon)),
        roots=roots,
        params=params,
        transfer_time=horizon,
    )


# ---------------------------------------------------------------------------
# time reversal

@dataclass(frozen=True)
class ReversalSnapshot:
    """Minimal dynamical snapshot the reversal symmetry acts on."""

    field: complex
    detunings: tuple[float, ...]
    direction: int = +1


def time_reversal_map(state: ReversalSnapshot) -> ReversalSnapshot:
    """Reverse evolution: negate detunings and the field amplitude, flip time direction.

    Applying the map twice is the identity. Atomic coherences are untouched;
    at an exact depopulation instant the field negation acts on zero and the
    flip is immaterial.
    """
    return ReversalSnapshot(
        field=-state.field,
        detunings=tuple(-d for d in state.detunings),
        direction=-state.direction,
    )
