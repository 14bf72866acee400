"""Physical parameter containers, derived quantities, and network validation.

All rates and frequencies are dimensionless multiples of a declared reference
rate (see UnitSystem); the containers themselves never convert units.
Construction is permissive: validate_network is the single gate that turns
bad values into named violations, so degenerate inputs can still be built
and inspected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

FAR_DETUNED_RATIO = 10.0


@dataclass(frozen=True)
class RateParams:
    """Cavity and atomic rates: waveguide coupling, free-space loss, homogeneous linewidth."""

    gamma1: float
    gamma2: float = 0.0
    gamma21: float = 0.0


@dataclass(frozen=True)
class MemoryNodeSpec:
    """Memory-node ensemble: inhomogeneous half-width, collective coupling, atom count.

    n_atoms is used only by the time-domain discretizer; closed forms work in
    collective variables.
    """

    delta_in: float
    omega0: float
    n_atoms: int = 4001


@dataclass(frozen=True)
class ProcessingNodeSpec:
    """One processing node: signed detuning and collective coupling."""

    detuning: float
    omega: float


@dataclass(frozen=True)
class NetworkSpec:
    """Full physical configuration: rates, one memory node, M processing nodes."""

    rates: RateParams
    memory: MemoryNodeSpec
    processors: tuple[ProcessingNodeSpec, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "processors", tuple(self.processors))


@dataclass(frozen=True)
class SignalModeSpec:
    """One temporal photon mode.

    width is the half-width of the spectral amplitude profile; shape selects
    the profile family ("lorentzian" or "gaussian"). center offsets the mode
    from the carrier, photons weights the mode in multi-mode aggregates.
    """

    arrival_time: float
    width: float
    shape: str = "lorentzian"
    center: float = 0.0
    photons: float = 1.0


@dataclass(frozen=True)
class UnitSystem:
    """Declares which rate all frequencies are expressed in."""

    reference_rate: float
    label: str = "gamma1"


@dataclass(frozen=True)
class DerivedQuantities:
    gamma_tot: float
    delta_tot: float
    m_max: float


def derived_quantities(net: NetworkSpec) -> DerivedQuantities:
    """Absorption rate, total linewidth, and mode capacity of the memory node.

    gamma_tot = 2*omega0^2/delta_tot is the photon absorption rate;
    m_max = floor(delta_in/gamma21) counts storable modes (infinite for
    gamma21 = 0).
    """
    mem = net.memory
    g21 = net.rates.gamma21
    delta_tot = mem.delta_in + g21
    gamma_tot = 2.0 * mem.omega0**2 / delta_tot if delta_tot > 0 else 0.0
    m_max = math.inf if g21 == 0 else float(math.floor(mem.delta_in / g21))
    return DerivedQuantities(gamma_tot=gamma_tot, delta_tot=delta_tot, m_max=m_max)


def validate_network(net: NetworkSpec, modes: tuple[SignalModeSpec, ...] = ()) -> list[str]:
    """Check type invariants and regime flags; return a list of violation strings.

    An empty list means the configuration is usable. Violations are data, not
    exceptions: callers decide whether a warning-grade flag (like the
    far-detuned ratio) should stop a run.
    """
    out = []
    r = net.rates
    if not r.gamma1 > 0:
        out.append("gamma1 must be positive")
    if r.gamma2 < 0:
        out.append("gamma2 must be nonnegative")
    if r.gamma21 < 0:
        out.append("gamma21 must be nonnegative")
    mem = net.memory
    if not mem.delta_in > 0:
        out.append("delta_in must be positive")
    if not mem.omega0 > 0:
        out.append("omega0 must be positive")
    if mem.n_atoms < 1:
        out.append("n_atoms must be at least 1")
    for m, node in enumerate(net.processors, start=1):
        if node.omega < 0:
            out.append(f"omega must be nonnegative for node {m}")
        if node.detuning == 0:
            out.append(f"detuning must be nonzero for idle processing node {m}")
    for mode in modes:
        if not mode.width > 0:
            out.append("mode width must be positive")
    # Far-detuned idle regime: every processing node must sit well outside the
    # declared signal bandwidths and the homogeneous linewidth.
    widths = [m.width for m in modes if m.width > 0]
    if r.gamma21 > 0:
        widths.append(r.gamma21)
    for m, node in enumerate(net.processors, start=1):
        if node.detuning != 0 and widths:
            if abs(node.detuning) < FAR_DETUNED_RATIO * max(widths):
                out.append(f"far-detuned regime violated for node {m}")
    return out


def symmetric_processors(count: int, delta: float, omega: float) -> tuple[ProcessingNodeSpec, ...]:
    """Build count idle nodes in +delta/-delta pairs with equal coupling.

    Pairwise opposite detunings cancel the static dispersion shift, the
    configuration every closed-form result here assumes.
    """
    if count % 2:
        raise ValueError("symmetric layout needs an even node count")
    nodes = []
    for _ in range(count // 2):
        nodes.append(ProcessingNodeSpec(detuning=+delta, omega=omega))
        nodes.append(ProcessingNodeSpec(detuning=-delta, omega=omega))
    return tuple(nodes)


def matched_network(
    m: int = 0,
    *,
    gamma1: float = 1.0,
    gamma2: float = 0.0,
    gamma21: float = 0.0,
    node_delta: float | None = None,
    omega_ratio: float = 0.25,
    delta_in: float | None = None,
    gamma_tot: float | None = None,
    n_atoms: int = 4001,
) -> NetworkSpec:
    """Build a network satisfying the impedance-matching conditions.

    gamma_tot defaults to gamma1+gamma2 (absorption matched to the cavity
    channels) and fixes omega0 through gamma_tot = 2*omega0^2/delta_tot.
    delta_in defaults to the broadening that flattens the response,
    gamma_tot/(2*Pi0) with Pi0 = 1 + m*(omega/delta)^2 for the symmetric
    layout. node_delta defaults to gamma1/0.3, with omega = omega_ratio*node_delta.
    """
    if node_delta is None:
        node_delta = gamma1 / 0.3
    processors = symmetric_processors(m, node_delta, omega_ratio * node_delta) if m else ()
    pi0 = 1.0 + sum(p.omega**2 / p.detuning**2 for p in processors)
    if gamma_tot is None:
        gamma_tot = gamma1 + gamma2
    if delta_in is None:
        delta_in = gamma_tot / (2.0 * pi0)
    delta_tot = delta_in + gamma21
    omega0 = math.sqrt(gamma_tot * delta_tot / 2.0)
    return NetworkSpec(
        rates=RateParams(gamma1=gamma1, gamma2=gamma2, gamma21=gamma21),
        memory=MemoryNodeSpec(delta_in=delta_in, omega0=omega0, n_atoms=n_atoms),
        processors=processors,
    )
