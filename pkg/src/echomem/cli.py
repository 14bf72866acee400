"""Command-line surface: config parsing, CSV/SVG emission, subcommand dispatch.

Subcommands: efficiency, match, transfer, oracle, figure, verify. Output is
CSV with units in the header plus a sidecar text file holding the resolved
configuration; identical configs reproduce byte-identical CSV. SVG plots are
an optional convenience (--format csv+svg). Thread count for sweeps comes
from the ECHOMEM_THREADS environment variable.
"""

from __future__ import annotations

import argparse
import configparser
import sys
from pathlib import Path

import numpy as np

from . import __version__, oracle, spectral, sweeps, transfer, verify
from .errors import ConfigError, EchoMemError
from .params import SignalModeSpec, derived_quantities, matched_network

_INT_KEYS = {"nodes", "n_atoms", "record_every", "points"}
_STR_KEYS = {"shape", "protocol"}
_SCHEMA = {
    "network": {
        "gamma1", "gamma2", "gamma21", "nodes", "node_delta", "omega_ratio",
        "delta_in", "gamma_tot", "n_atoms",
    },
    "signal": {"arrival_time", "width", "shape", "center", "photons", "tau"},
    "transfer": {"delta_in", "omega0", "omega1"},
    "oracle": {
        "protocol", "flip_time", "span_start", "span_end", "dt", "record_every",
        "n_atoms", "duration",
    },
}


def load_config(path: str | None) -> dict:
    """Parse the line-oriented key = value config; unknown keys are rejected."""
    sections: dict[str, dict] = {name: {} for name in _SCHEMA}
    if path is None:
        return sections
    if not Path(path).exists():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(strict=True, interpolation=None)
    parser.optionxform = str
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"config parse error: {exc}") from exc
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        for key, raw in parser[section].items():
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown config key {section}.{key}")
            if key in _STR_KEYS:
                sections[section][key] = raw.strip()
            elif key in _INT_KEYS:
                try:
                    sections[section][key] = int(raw)
                except ValueError as exc:
                    raise ConfigError(f"config key {section}.{key} must be an integer") from exc
            else:
                try:
                    sections[section][key] = float(raw)
                except ValueError as exc:
                    raise ConfigError(f"config key {section}.{key} must be a number") from exc
    return sections


def network_from_config(cfg: dict):
    kw = dict(cfg.get("network", {}))
    m = kw.pop("nodes", 0)
    return matched_network(m, **kw)


def signal_from_config(cfg: dict) -> tuple[SignalModeSpec, float | None]:
    kw = dict(cfg.get("signal", {}))
    tau = kw.pop("tau", None)
    kw.setdefault("arrival_time", 0.0)
    kw.setdefault("width", 0.05)
    return SignalModeSpec(**kw), tau


def transfer_from_config(cfg: dict) -> transfer.TransferConfig:
    kw = dict(cfg.get("transfer", {}))
    kw.setdefault("delta_in", 6.0)
    kw.setdefault("omega0", 1.0)
    kw.setdefault("omega1", 0.3)
    return transfer.TransferConfig(**kw)


# ---------------------------------------------------------------------------
# emission helpers

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    return f"{float(v):.17g}"


def write_csv(path: Path, columns: dict, units: dict) -> None:
    header = ",".join(f"{name} [{units.get(name, '1')}]" for name in columns)
    arrays = [np.atleast_1d(np.asarray(col)) for col in columns.values()]
    with open(path, "w", newline="") as fh:
        fh.write(header + "\n")
        for row in zip(*arrays):
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_sidecar(path: Path, cfg: dict, extra: dict | None = None) -> None:
    lines = [f"echomem {__version__}"]
    for section in sorted(cfg):
        for key in sorted(cfg[section]):
            lines.append(f"{section}.{key} = {cfg[section][key]}")
    for key, val in (extra or {}).items():
        lines.append(f"{key} = {val}")
    path.write_text("\n".join(lines) + "\n")


def write_svg(path: Path, x, curves: dict, xlabel: str, ylabel: str) -> None:
    import matplotlib

    matplotlib.use("Agg")
    from matplotlib import pyplot as plt

    plt.rcParams["svg.hashsalt"] = "echomem"
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for label, y in curves.items():
        ax.plot(x, y, label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if len(curves) > 1:
        ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _maybe_svg(args, out: Path, x, curves: dict, xlabel: str, ylabel: str) -> None:
    if args.format == "csv+svg":
        write_svg(out, x, curves, xlabel, ylabel)


# ---------------------------------------------------------------------------
# subcommands

def _cmd_efficiency(args, cfg, out_dir: Path) -> int:
    net = network_from_config(cfg)
    dq = derived_quantities(net)
    resp = spectral.build_response(net, half_width=2.0, points=4001)
    write_csv(
        out_dir / "efficiency_response.csv",
        {
            "nu": resp.grid,
            "z": resp.z_values,
            "re_response": resp.response.real,
            "im_response": resp.response.imag,
        },
        {"nu": "gamma1", "z": "1", "re_response": "1", "im_response": "1"},
    )
    _maybe_svg(
        args, out_dir / "efficiency_response.svg", resp.grid,
        {"Z": resp.z_values, "Z^2": resp.z_values**2}, "nu [gamma1]", "efficiency",
    )
    extra = {
        "gamma_tot": _fmt(dq.gamma_tot),
        "delta_opt": _fmt(spectral.optimal_broadening(net)),
        "mode_capacity": dq.m_max,
    }
    mode, tau = signal_from_config(cfg)
    report = {"z_peak": [spectral.spectral_efficiency(net, mode.center)]}
    units = {"z_peak": "1"}
    report["storage"] = [spectral.storage_efficiency_mode(net, mode)]
    units["storage"] = "1"
    if tau is not None:
        report["retrieval"] = [spectral.retrieval_efficiency_mode(net, mode, tau)]
        report["total"] = [report["storage"][0] * report["retrieval"][0]]
        units["retrieval"] = units["total"] = "1"
    write_csv(out_dir / "efficiency_modes.csv", report, units)
    write_sidecar(out_dir / "efficiency.config.txt", cfg, extra)
    print(
        f"Z(0) = {spectral.spectral_efficiency(net, 0.0):.12g}; "
        f"gamma_tot = {dq.gamma_tot:.12g}; delta_opt = {extra['delta_opt']}"
    )
    return 0


def _cmd_match(args, cfg, out_dir: Path) -> int:
    net = network_from_config(cfg)
    analytic = spectral.optimal_broadening(net)
    search = sweeps.optimize_flatness(net, (analytic / 4.0, 4.0 * analytic))
    write_csv(
        out_dir / "match.csv",
        {
            "delta_opt": [analytic],
            "search_optimum": [search.optimum],
            "bandwidth": [search.bandwidth],
            "multimodal": [search.multimodal],
        },
        {"delta_opt": "gamma1", "search_optimum": "gamma1", "bandwidth": "gamma1", "multimodal": "1"},
    )
    write_sidecar(out_dir / "match.config.txt", cfg)
    print(f"delta_opt = {analytic:g} [gamma1] (search optimum {search.optimum:.6g})")
    return 0


def _cmd_transfer(args, cfg, out_dir: Path) -> int:
    tc = transfer_from_config(cfg)
    res = transfer.transfer_efficiency(tc)
    taus, phi = res.mode_trace
    _, field = res.field_trace
    write_csv(
        out_dir / "transfer_trace.csv",
        {"tau": taus, "phi": phi, "re_field": field.real, "im_field": field.imag},
        {"tau": "1/omega0", "phi": "omega0", "re_field": "1", "im_field": "1"},
    )
    _maybe_svg(
        args, out_dir / "transfer_trace.svg", taus,
        {"phi": phi, "|field|": np.abs(field)}, "tau [1/omega0]", "amplitude",
    )
    roots = res.roots
    write_csv(
        out_dir / "transfer_report.csv",
        {
            "delta_in": [tc.delta_in],
            "omega0": [tc.omega0],
            "omega1": [tc.omega1],
            "K": [res.params.K],
            "xi": [res.params.xi],
            "P1": [res.P1],
            "Q1": [res.Q1],
            "depopulation": [transfer.cavity_depopulation(tc)],
            "re_nu1": [roots.nu1.real], "im_nu1": [roots.nu1.imag],
            "re_nu2": [roots.nu2.real], "im_nu2": [roots.nu2.imag],
            "re_nu3": [roots.nu3.real], "im_nu3": [roots.nu3.imag],
        },
        {"delta_in": "omega0", "K": "1/omega0", "P1": "1/omega0"},
    )
    write_sidecar(out_dir / "transfer.config.txt", cfg)
    print(f"Q1 = {res.Q1:.9g} at delta_in = {tc.delta_in:g} (P1 = {res.P1:.9g})")
    return 0


def _cmd_oracle(args, cfg, out_dir: Path) -> int:
    opts = dict(cfg.get("oracle", {}))
    protocol = opts.pop("protocol", "storage")
    dt = opts.pop("dt", None)
    record_every = opts.pop("record_every", 10)
    n_atoms = opts.pop("n_atoms", None)

    if protocol in ("storage", "echo"):
        net = network_from_config(cfg)
        if n_atoms is not None:
            from dataclasses import replace

            net = replace(net, memory=replace(net.memory, n_atoms=n_atoms))
        pulse, _ = signal_from_config(cfg)
        ens = oracle.sample_ensemble(net.memory.delta_in, net.memory.omega0, net.memory.n_atoms)
        schedule = None
        span = None
        if "span_start" in opts and "span_end" in opts:
            span = (opts["span_start"], opts["span_end"])
        if protocol == "echo":
            flip_time = opts.get("flip_time")
            if flip_time is None:
                raise ConfigError("echo protocol needs oracle.flip_time")
            schedule = oracle.Schedule(
                events=(oracle.ScheduleEvent(time=flip_time, action="crib_flip"),)
            )
            if span is None:
                pad = oracle.PULSE_WINDOW / pulse.width
                span = (pulse.arrival_time - pad, 2.0 * flip_time - pulse.arrival_time + pad + 20.0)
        hist = oracle.integrate_storage(
            net, ens, pulse, schedule, dt=dt, span=span, record_every=record_every
        )
        label = "storage efficiency"
        value = hist.summary["storage_efficiency"]
    elif protocol == "transfer":
        tc = transfer_from_config(cfg)
        hist = oracle.transfer_protocol(
            tc,
            n_atoms=n_atoms or 4001,
            duration=opts.get("duration"),
            dt=dt,
            record_every=record_every,
        )
        label = "transfer efficiency"
        value = hist.summary["transfer_efficiency"]
    elif protocol == "reversibility":
        tc = transfer_from_config(cfg)
        fidelity = oracle.reversibility_check(
            tc, n_atoms=n_atoms or 4001, duration=opts.get("duration"), dt=dt
        )
        write_csv(out_dir / "oracle_report.csv", {"fidelity": [fidelity]}, {})
        write_sidecar(out_dir / "oracle.config.txt", cfg)
        print(f"reversal fidelity = {fidelity:.9g}")
        return 0
    else:
        raise ConfigError(f"unknown oracle protocol {protocol!r}")

    hist.to_csv(out_dir / "oracle_trajectory.csv")
    _maybe_svg(
        args, out_dir / "oracle_trajectory.svg", hist.times,
        {"|field|": np.abs(hist.field), "memory norm": hist.memory_norm},
        "t [1/gamma1]", "amplitude",
    )
    write_sidecar(
        out_dir / "oracle.config.txt", cfg,
        {k: _fmt(v) for k, v in hist.summary.items()},
    )
    print(f"{label} = {value:.9g} (energy drift {hist.energy_residual():.3g})")
    return 0


def _cmd_figure(args, cfg, out_dir: Path) -> int:
    data = sweeps.figure_dataset(args.which)
    write_csv(out_dir / f"{args.which}.csv", data.columns, data.units)
    write_sidecar(
        out_dir / f"{args.which}.config.txt", cfg,
        {"config_hash": data.config_hash, **{k: v for k, v in sorted(data.metadata.items())}},
    )
    if args.format == "csv+svg":
        names = list(data.columns)
        if "nu" in data.columns:
            x = data.columns["nu"]
            curves = {n: data.columns[n] for n in names if n != "nu"}
            write_svg(out_dir / f"{args.which}.svg", x, curves, "nu [gamma1]", "Z^2")
        elif "tau" in data.columns:
            deltas = np.unique(data.columns["delta_in"])
            shown = deltas[:: max(1, len(deltas) // 5)]
            curves = {}
            for d in shown:
                mask = data.columns["delta_in"] == d
                curves[f"delta_in={d:g}"] = data.columns["phi"][mask]
            tau = data.columns["tau"][data.columns["delta_in"] == deltas[0]]
            write_svg(out_dir / f"{args.which}.svg", tau, curves, "tau [1/omega0]", "phi")
        else:
            x = data.columns[names[0]]
            curves = {n: data.columns[n] for n in names[1:]}
            write_svg(out_dir / f"{args.which}.svg", x, curves, names[0], names[1])
    print(f"{args.which}: {len(next(iter(data.columns.values())))} rows")
    return 0


def _cmd_verify(args, cfg, out_dir: Path) -> int:
    indices = None
    if args.only:
        indices = [int(tok) for tok in args.only.split(",")]
    results = verify.run_all(indices)
    for res in results:
        print(res.line())
    write_csv(
        out_dir / "verify.csv",
        {
            "criterion": [r.index for r in results],
            "passed": [1 if r.passed else 0 for r in results],
        },
        {},
    )
    write_sidecar(
        out_dir / "verify.config.txt", cfg,
        {f"criterion_{r.index:02d}": r.name for r in results},
    )
    failed = [r for r in results if not r.passed]
    if failed:
        print(f"{len(failed)} of {len(results)} checks failed", file=sys.stderr)
        return 1
    return 0


_COMMANDS = {
    "efficiency": _cmd_efficiency,
    "match": _cmd_match,
    "transfer": _cmd_transfer,
    "oracle": _cmd_oracle,
    "figure": _cmd_figure,
    "verify": _cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="echomem",
        description="Cavity quantum memory: spectral efficiency, node transfer, time-domain checks.",
    )
    p.add_argument("--config", help="INI-style configuration file")
    p.add_argument("--out", default="echomem-out", help="output directory (default: echomem-out)")
    p.add_argument("--format", choices=["csv", "csv+svg"], default="csv")
    p.add_argument(
        "--seedless", action="store_true",
        help="verify that the run consumed no global random state",
    )
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("efficiency", help="spectral response and per-mode efficiency report")
    sub.add_parser("match", help="optimal broadening: analytic value and numeric search")
    sub.add_parser("transfer", help="self-mode, cavity trace, and transfer efficiency")
    sub.add_parser("oracle", help="time-domain ensemble run for the configured protocol")
    fig = sub.add_parser("figure", help="regenerate a figure dataset")
    fig.add_argument(
        "which",
        choices=["fig1a", "fig1b", "fig1c", "fig2", "fig3a", "fig3b", "fig4", "fig5"],
    )
    ver = sub.add_parser("verify", help="run the oracle-vs-analytic acceptance checks")
    ver.add_argument("--only", help="comma-separated criterion indices (default: all)")
    return p


def run_command(argv) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        if args.seedless:
            before = np.random.get_state()
        status = _COMMANDS[args.command](args, cfg, out_dir)
        if args.seedless:
            after = np.random.get_state()
            if not (np.array_equal(before[1], after[1]) and before[2] == after[2]):
                raise EchoMemError("global random state was consumed during the run")
        return status
    except EchoMemError as exc:
        print(f"echomem: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"echomem: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))
