"""Parameter sweeps: figure datasets, threshold location, flatness search.

Every sweep is a pure map over its grid, so rerunning with the same
configuration reproduces byte-identical output. Grid points are evaluated on
a small thread pool (ECHOMEM_THREADS overrides the size); assembly order
follows the grid, not completion order.
"""

from __future__ import annotations

import hashlib
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .errors import ThresholdError
from .params import NetworkSpec, derived_quantities, matched_network
from .spectral import bandwidth_metric, build_response
from .transfer import TransferConfig, self_mode_values, characteristic_roots, transfer_efficiency

DEFAULT_POINTS = 201
RESPONSE_POINTS = 4001


def worker_count() -> int:
    env = os.environ.get("ECHOMEM_THREADS")
    if env is not None:
        n = int(env)
        if n < 1:
            raise ValueError("ECHOMEM_THREADS must be a positive integer")
        return n
    return min(4, os.cpu_count() or 1)


@dataclass(frozen=True)
class SweepGrid:
    """1-D parameter axis with fixed companions and a named output metric."""

    parameter: str
    lower: float
    upper: float
    count: int = DEFAULT_POINTS
    scale: str = "linear"
    fixed: tuple = ()
    metric: str = "value"

    def __post_init__(self):
        if self.count < 2:
            raise ValueError("grid needs at least two points")
        if not self.lower < self.upper:
            raise ValueError("grid lower bound must be below upper bound")
        if self.scale not in ("linear", "log"):
            raise ValueError(f"unknown grid scale {self.scale!r}")

    def values(self) -> np.ndarray:
        if self.scale == "log":
            return np.geomspace(self.lower, self.upper, self.count)
        return np.linspace(self.lower, self.upper, self.count)


@dataclass(eq=False)
class SweepResult:
    """Columnar sweep output with units and a config fingerprint."""

    columns: dict  # name -> ndarray, equal lengths
    units: dict  # name -> unit string
    metadata: dict = field(default_factory=dict)
    config_hash: str = ""

    def __post_init__(self):
        lengths = {len(v) for v in self.columns.values()}
        if len(lengths) > 1:
            raise ValueError("sweep columns have unequal lengths")


def config_fingerprint(items) -> str:
    canon = ";".join(f"{k}={v:.17g}" if isinstance(v, float) else f"{k}={v}" for k, v in sorted(items))
    return hashlib.sha256(canon.encode()).hexdigest()


def evaluate_sweep(grid: SweepGrid, fn, unit: str = "1") -> SweepResult:
    xs = grid.values()
    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        ys = list(pool.map(fn, xs))
    meta = dict(grid.fixed)
    fingerprint = config_fingerprint(
        [("parameter", grid.parameter), ("lower", grid.lower), ("upper", grid.upper),
         ("count", grid.count), ("scale", grid.scale), ("metric", grid.metric)] + list(grid.fixed)
    )
    return SweepResult(
        columns={grid.parameter: xs, grid.metric: np.asarray(ys, dtype=float)},
        units={grid.parameter: unit, grid.metric: "1"},
        metadata=meta,
        config_hash=fingerprint,
    )


# ---------------------------------------------------------------------------
# figure datasets

FIG1_M_VALUES = (0, 2, 4, 8, 16)
FIG1_RATIOS = {"fig1a": 0.4, "fig1b": 0.25, "fig1c": 0.1}
FIG2_MULTIPLIERS = (0.25, 0.5, 1.0, 2.0, 4.0)


def _fig1(ratio: float) -> SweepResult:
    nu = np.linspace(-2.0, 2.0, RESPONSE_POINTS)
    columns = {"nu": nu}
    units = {"nu": "gamma1"}
    meta = {"omega_over_delta": ratio}
    for m in FIG1_M_VALUES:
        net = matched_network(m, omega_ratio=ratio)
        resp = build_response(net, half_width=2.0, points=RESPONSE_POINTS)
        columns[f"z2_m{m}"] = resp.z_values**2
        units[f"z2_m{m}"] = "1"
        meta[f"delta_in_m{m}"] = net.memory.delta_in
    fingerprint = config_fingerprint(
        [("figure", "fig1"), ("ratio", ratio), ("points", RESPONSE_POINTS)]
    )
    return SweepResult(columns=columns, units=units, metadata=meta, config_hash=fingerprint)


def _fig2() -> SweepResult:
    nu = np.linspace(-2.0, 2.0, 1001)
    base = matched_network(0)
    d_opt = base.memory.delta_in
    columns = {"nu": nu}
    units = {"nu": "gamma1"}
    meta = {"delta_opt": d_opt}
    for mult in FIG2_MULTIPLIERS:
        net = retune_broadening(base, mult * d_opt)
        resp = build_response(net, half_width=2.0, points=1001)
        tag = f"z2_x{mult:g}".replace(".", "p")
        columns[tag] = resp.z_values**2
        units[tag] = "1"
        meta[tag + "_delta_in"] = mult * d_opt
    fingerprint = config_fingerprint([("figure", "fig2"), ("delta_opt", d_opt)])
    return SweepResult(columns=columns, units=units, metadata=meta, config_hash=fingerprint)


def _fig3(panel: str) -> SweepResult:
    lo, hi = (0.2, 1.8) if panel == "fig3a" else (1.8, 10.0)
    deltas = np.linspace(lo, hi, 41)
    tau = np.linspace(0.0, 30.0, DEFAULT_POINTS)
    rows_d = np.repeat(deltas, tau.size)
    rows_t = np.tile(tau, deltas.size)
    phi = np.empty(rows_d.size)
    for i, d in enumerate(deltas):
        roots = characteristic_roots(TransferConfig(delta_in=float(d), omega0=1.0, omega1=0.3))
        phi[i * tau.size : (i + 1) * tau.size] = self_mode_values(roots, tau)
    fingerprint = config_fingerprint(
        [("figure", panel), ("lower", lo), ("upper", hi), ("omega0", 1.0), ("omega1", 0.3)]
    )
    return SweepResult(
        columns={"delta_in": rows_d, "tau": rows_t, "phi": phi},
        units={"delta_in": "omega0", "tau": "1/omega0", "phi": "omega0"},
        metadata={"omega0": 1.0, "omega1": 0.3},
        config_hash=fingerprint,
    )


def q1_of_delta(delta_in: float, omega0: float = 1.0, omega1: float = 0.3) -> float:
    cfg = TransferConfig(delta_in=float(delta_in), omega0=omega0, omega1=omega1)
    return transfer_efficiency(cfg, trace_points=2).Q1


def _fig45(name: str) -> SweepResult:
    lo, hi = (0.2, 10.0) if name == "fig4" else (5.0, 10.0)
    grid = SweepGrid(
        parameter="delta_in",
        lower=lo,
        upper=hi,
        count=DEFAULT_POINTS,
        fixed=(("omega0", 1.0), ("omega1", 0.3), ("figure", name)),
        metric="Q1",
    )
    return evaluate_sweep(grid, q1_of_delta, unit="omega0")


def figure_dataset(which: str) -> SweepResult:
    """Regenerate the dataset behind one of the standard figure panels."""
    if which in FIG1_RATIOS:
        return _fig1(FIG1_RATIOS[which])
    if which == "fig2":
        return _fig2()
    if which in ("fig3a", "fig3b"):
        return _fig3(which)
    if which in ("fig4", "fig5"):
        return _fig45(which)
    raise ValueError(f"unknown figure id {which!r}")


# ---------------------------------------------------------------------------
# threshold and optimum searches

def find_threshold(grid, values, level: float, *, fn=None, tol: float = 1e-3) -> float:
    """Locate where a monotone-increasing curve first crosses `level`.

    With `fn` given, the bracketing grid interval is refined by root
    bisection to well below `tol`; otherwise linear interpolation on the
    sampled curve is used.
    """
    x = np.asarray(grid, dtype=float)
    y = np.asarray(values, dtype=float)
    if level <= y[0]:
        return float(x[0])
    above = np.nonzero(y >= level)[0]
    if above.size == 0:
        raise ThresholdError(f"curve never reaches level {level:g} (max {y.max():g})")
    i = above[0]
    lo, hi = x[i - 1], x[i]
    if fn is not None:
        return float(brentq(lambda d: fn(d) - level, lo, hi, xtol=tol / 10.0))
    frac = (level - y[i - 1]) / (y[i] - y[i - 1])
    return float(lo + frac * (hi - lo))


def retune_broadening(net: NetworkSpec, delta_in: float) -> NetworkSpec:
    """Change the broadening while holding the total absorption rate fixed."""
    gamma_tot = derived_quantities(net).gamma_tot
    delta_tot = delta_in + net.rates.gamma21
    omega0 = float(np.sqrt(gamma_tot * delta_tot / 2.0))
    memory = replace(net.memory, delta_in=float(delta_in), omega0=omega0)
    return replace(net, memory=memory)


@dataclass(frozen=True)
class FlatnessSearch:
    optimum: float
    bandwidth: float
    multimodal: bool


def optimize_flatness(
    net: NetworkSpec, search_range: tuple[float, float], *, level: float = 0.9999
) -> FlatnessSearch:
    """Numerically maximize the flat-response bandwidth over the broadening.

    The absorption-rate matching condition is held fixed while the
    broadening varies. A coarse unimodality scan flags multi-peaked
    objectives; the refined optimum is still returned.
    """
    lo, hi = search_range
    if lo == hi:
        net0 = retune_broadening(net, lo)
        resp = build_response(net0, points=RESPONSE_POINTS)
        return FlatnessSearch(optimum=float(lo), bandwidth=bandwidth_metric(resp, level), multimodal=False)

    def objective(delta_in: float) -> float:
        resp = build_response(retune_broadening(net, float(delta_in)), points=RESPONSE_POINTS)
        try:
            return bandwidth_metric(resp, level)
        except Exception:
            return 0.0

    coarse_x = np.linspace(lo, hi, 21)
    coarse_y = np.array([objective(x) for x in coarse_x])
    interior = coarse_y[1:-1]
    peaks = np.sum((interior > coarse_y[:-2]) & (interior > coarse_y[2:]))
    multimodal = bool(peaks > 1)

    best = int(np.argmax(coarse_y))
    blo = coarse_x[max(best - 1, 0)]
    bhi = coarse_x[min(best + 1, coarse_x.size - 1)]
    res = minimize_scalar(
        lambda d: -objective(d), bounds=(blo, bhi), method="bounded",
        options={"xatol": 1e-5 * (hi - lo)},
    )
    return FlatnessSearch(
        optimum=float(res.x), bandwidth=float(-res.fun), multimodal=multimodal
    )
