"""Command-line front end.

Subcommands::

    emtrloc locate    --network net.net --fault edge=e1,offset=4000,R=0,angle=90 ...
    emtrloc sweep     --network net.net --fault ... --out dir
    emtrloc decompose --network net.net

Everything is CSV/text output; plotting is left to downstream tools.  Runs
are reproducible: the seed defaults to a fixed constant and all emitted
bytes depend only on the inputs and the seed (pass ``--seed random`` to opt
out).

Exit codes: 0 success, 1 configuration/input error, 2 no transient detected.
"""

from __future__ import annotations

import argparse
import os
import secrets
import sys
from dataclasses import dataclass

from .anneal import SAParams, write_trace_csv
from .graphs import decompose_into_paths
from .locate import (
    EnergyCache,
    LocatorConfig,
    NoTransientDetected,
    locate_campaign,
    locate_fault,
    write_campaign_csv,
)
from .network import (
    EdgePosition,
    NetworkError,
    as_multigraph,
    parse_network_file,
    path_length,
    path_to_edge_position,
)
from .simulate import (
    FaultScenario,
    SimulationError,
    default_record_window,
    discretize,
    read_waveform_csv,
    simulate_fault,
    write_waveform_csv,
)

__all__ = ["main", "cmd_locate", "cmd_sweep", "cmd_decompose", "RunSpec"]

_DEFAULT_SEED = 0


@dataclass
class RunSpec:
    """Validated inputs of one CLI invocation."""

    net: object
    scenario: FaultScenario | None
    measured_path: str | None
    cfg: LocatorConfig
    out_dir: str | None
    repeats: int
    jobs: int
    verbose: bool
    record_window: float | None


class _CliError(Exception):
    pass


def _parse_fault(spec: str, net) -> dict:
    fields = {}
    for part in spec.split(","):
        if "=" not in part:
            raise _CliError(f"--fault: expected key=value, got {part!r}")
        k, v = part.split("=", 1)
        fields[k] = v
    missing = {"edge", "offset", "R", "angle"} - set(fields)
    if missing:
        raise _CliError(f"--fault: missing {', '.join(sorted(missing))}")
    try:
        return {
            "edge": fields["edge"],
            "offset": float(fields["offset"]),
            "R": float(fields["R"]),
            "angle": float(fields["angle"]),
        }
    except ValueError as exc:
        raise _CliError(f"--fault: {exc}") from None


def _build_spec(args) -> RunSpec:
    if not os.path.exists(args.network):
        raise _CliError(f"network file not found: {args.network}")
    net = parse_network_file(args.network)
    if args.seed == "random":
        seed = secrets.randbelow(2**31)
    else:
        try:
            seed = int(args.seed)
        except ValueError:
            raise _CliError(f"--seed must be an integer or 'random', got {args.seed!r}") from None
    sa = SAParams(t0=args.t0, cooling=args.cooling, n_term=args.n_term,
                  accuracy=args.accuracy, seed=seed)
    cfg = LocatorConfig(sa=sa, accuracy=args.accuracy, guess_impedance=args.guess_r,
                        mode=args.mode, jobs=args.jobs)
    scenario = None
    measured_path = None
    if getattr(args, "measured", None):
        if not os.path.exists(args.measured):
            raise _CliError(f"measured waveform file not found: {args.measured}")
        measured_path = args.measured
    elif getattr(args, "fault", None):
        f = _parse_fault(args.fault, net)
        try:
            net.edge_by_id(f["edge"])
        except NetworkError as exc:
            raise _CliError(str(exc)) from None
        window = args.record_window if args.record_window else default_record_window(net)
        scenario = FaultScenario(
            position=EdgePosition(f["edge"], f["offset"]),
            impedance=f["R"],
            inception_angle=f["angle"],
            record_window=window,
        )
    out_dir = getattr(args, "out", None)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    return RunSpec(net=net, scenario=scenario, measured_path=measured_path, cfg=cfg,
                   out_dir=out_dir, repeats=args.repeats, jobs=args.jobs,
                   verbose=args.verbose, record_window=args.record_window)


def _measured_waveform(spec: RunSpec, dnet):
    if spec.measured_path is not None:
        return read_waveform_csv(spec.measured_path)
    if spec.scenario is None:
        raise _CliError("one of --fault or --measured is required")
    return simulate_fault(dnet, spec.scenario)


def cmd_locate(args) -> int:
    spec = _build_spec(args)
    dnet = discretize(spec.net, spec.cfg.accuracy)
    measured = _measured_waveform(spec, dnet)

    if spec.repeats > 1:
        if spec.scenario is None:
            raise _CliError("--repeats needs --fault (campaign mode)")
        report = locate_campaign(spec.net, [spec.scenario], spec.cfg, spec.repeats,
                                 jobs=spec.jobs)
        print(report.summary())
        if spec.out_dir:
            write_campaign_csv(report, os.path.join(spec.out_dir, "campaign.csv"))
        failed = [s for s in report.scenarios if s.error]
        if failed:
            print(f"error: {failed[0].error}", file=sys.stderr)
            return 1
        return 0

    result = locate_fault(spec.net, measured, spec.cfg, dnet=dnet, cache=EnergyCache())
    ep = result.edge_position
    print(f"located: edge {ep.edge} at {ep.offset:.9g} m from node "
          f"{spec.net.edge_by_id(ep.edge).endpoints[0]}")
    print(f"path {result.path_index} position {result.position_on_path:.9g} m, "
          f"energy {result.energy:.9g} A^2.us, evaluations {result.total_evaluations}")
    for m in result.per_path:
        nodes = " ".join(result.decomposition.paths[m.path_index].nodes)
        print(f"  path {m.path_index} [{nodes}]: max {m.energy:.9g} at {m.position:.9g} m "
              f"({m.evaluations} evaluations)")
    if spec.verbose:
        print(f"wall time {result.wall_time:.2f} s", file=sys.stderr)
    if spec.out_dir:
        write_waveform_csv(measured, os.path.join(spec.out_dir, "measured.csv"))
        for i, trace in enumerate(result.traces):
            if trace is not None:
                write_trace_csv(trace, os.path.join(spec.out_dir, f"trace_path{i}.csv"))
        with open(os.path.join(spec.out_dir, "location.csv"), "w", encoding="utf-8") as fh:
            fh.write("path,position_m,edge,offset_m,energy,evaluations,winner\n")
            for m in result.per_path:
                p = result.decomposition.paths[m.path_index]
                mep = path_to_edge_position(spec.net, p, m.position)
                fh.write(f"{m.path_index},{m.position:.9g},{mep.edge},{mep.offset:.9g},"
                         f"{m.energy:.9g},{m.evaluations},{int(m.path_index == result.path_index)}\n")
    return 0


def cmd_sweep(args) -> int:
    from .locate import _derived_seeds, _path_objective
    from .simulate import time_reverse

    spec = _build_spec(args)
    if not spec.out_dir:
        raise _CliError("sweep requires --out <dir>")
    dnet = discretize(spec.net, spec.cfg.accuracy)
    measured = _measured_waveform(spec, dnet)
    decomp_seed, _ = _derived_seeds(spec.cfg.sa.seed)
    decomp = decompose_into_paths(as_multigraph(spec.net), seed=decomp_seed)
    cache = EnergyCache()
    reversed_wf = time_reverse(measured)
    for i, path in enumerate(decomp.paths):
        objective = _path_objective(spec.net, dnet, path, reversed_wf,
                                    spec.cfg.guess_impedance, cache)
        length = path_length(spec.net, path)
        step = spec.cfg.accuracy
        rows = []
        k = 1
        while k * step <= length + 1e-9:
            s = k * step
            rows.append((s, objective(s)))
            k += 1
        out_path = os.path.join(spec.out_dir, f"path_{i}_energy.csv")
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write("position_m,energy\n")
            for s, e in rows:
                fh.write(f"{s:.9g},{e:.9g}\n")
        best = max(rows, key=lambda r: r[1])
        print(f"path {i} [{' '.join(path.nodes)}]: {len(rows)} points, "
              f"max {best[1]:.9g} at {best[0]:.9g} m -> {out_path}")
    return 0


def cmd_decompose(args) -> int:
    from .locate import _derived_seeds

    if not os.path.exists(args.network):
        raise _CliError(f"network file not found: {args.network}")
    net = parse_network_file(args.network)
    seed = secrets.randbelow(2**31) if args.seed == "random" else int(args.seed)
    decomp_seed, _ = _derived_seeds(seed)
    decomp = decompose_into_paths(as_multigraph(net), seed=decomp_seed)
    print(f"k={decomp.k}")
    print(decomp.dump())
    return 0


def _add_common(p: argparse.ArgumentParser, with_scenario: bool = True) -> None:
    p.add_argument("--network", required=True, help="network config file")
    p.add_argument("--seed", default=str(_DEFAULT_SEED),
                   help="integer seed or 'random' (default: %(default)s)")
    if with_scenario:
        p.add_argument("--fault", help="edge=<id>,offset=<m>,R=<ohm>,angle=<deg>")
        p.add_argument("--measured", help="measured waveform CSV (time_us,value)")
        p.add_argument("--record-window", type=float, default=None,
                       help="seconds of fault transient to record (default: auto)")
        p.add_argument("--accuracy", type=float, default=10.0, help="m (default: %(default)s)")
        p.add_argument("--guess-r", type=float, default=20.0,
                       help="guessed branch impedance, ohm (default: %(default)s)")
        p.add_argument("--t0", type=float, default=1.0,
                       help="starting temperature (default: %(default)s)")
        p.add_argument("--cooling", type=float, default=0.8,
                       help="cooling coefficient (default: %(default)s)")
        p.add_argument("--n-term", type=int, default=10,
                       help="termination rejection count (default: %(default)s)")
        p.add_argument("--mode", choices=("sa", "exhaustive"), default="sa")
        p.add_argument("--repeats", type=int, default=1)
        p.add_argument("--out", help="output directory for CSVs")
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("-v", "--verbose", action="store_true")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="emtrloc",
        description="Locate short-circuit faults on branched power lines by "
                    "time reversal of the fault transient.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_loc = sub.add_parser("locate", help="locate a fault (single run or campaign)")
    _add_common(p_loc)
    p_sweep = sub.add_parser("sweep", help="exhaustive energy curves per path")
    _add_common(p_sweep)
    p_dec = sub.add_parser("decompose", help="print the minimal path decomposition")
    _add_common(p_dec, with_scenario=False)

    args = parser.parse_args(argv)
    try:
        if args.command == "locate":
            return cmd_locate(args)
        if args.command == "sweep":
            return cmd_sweep(args)
        return cmd_decompose(args)
    except NoTransientDetected as exc:
        print(f"no transient detected: {exc}", file=sys.stderr)
        return 2
    except (_CliError, NetworkError, SimulationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
