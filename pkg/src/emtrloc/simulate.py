"""Time-domain transient simulation on the branched line network.

The lossy telegrapher's equations are integrated with a staggered-grid
leapfrog scheme: voltages live on cell boundaries at integer time steps,
currents at cell centres and half steps, and series resistance is handled
semi-implicitly so the update stays explicit.  Nodes enforce a single
voltage fed by the adjacent half-cells' capacitance, with lumped resistive
branches (terminations, source, fault, guess branch) integrated
trapezoidally; ideal (zero-ohm) branches clamp the point instead.

Forward fault runs start from the exact AC phasor steady state so that the
inception angle has its physical meaning, and return the observed voltage
minus an identical healthy run.  Back-injection drives a waveform behind the
observation node's terminating impedance into the healthy network with a
guessed shunt branch and records that branch's current.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _kernel
from .network import (
    EdgePosition,
    NetworkError,
    NetworkTopology,
    characteristic_impedance,
    max_travel_time,
    propagation_speed,
    travel_time,
)

__all__ = [
    "SimulationError",
    "GridSnapWarning",
    "Waveform",
    "FaultScenario",
    "DiscretizedNetwork",
    "discretize",
    "default_record_window",
    "simulate_fault",
    "time_reverse",
    "back_inject",
    "probe_injection",
    "signal_energy",
    "prefault_voltage_phasor",
    "write_waveform_csv",
    "read_waveform_csv",
]


class SimulationError(ValueError):
    """Invalid simulation input."""


class GridSnapWarning(UserWarning):
    """A requested position was moved to the nearest cell boundary."""


@dataclass(frozen=True)
class Waveform:
    """Uniformly sampled real signal (V or A)."""

    samples: np.ndarray
    dt: float  # s
    start_time: float = 0.0  # s

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=float)
        if arr.ndim != 1 or arr.size < 1:
            raise SimulationError("waveform needs at least one sample")
        if not self.dt > 0:
            raise SimulationError("dt must be > 0")
        object.__setattr__(self, "samples", arr)

    @property
    def duration(self) -> float:
        return (self.samples.size - 1) * self.dt

    @property
    def times(self) -> np.ndarray:
        return self.start_time + self.dt * np.arange(self.samples.size)


def signal_energy(w: Waveform) -> float:
    """Sum of squared samples times the step, in A^2*us (or V^2*us)."""
    return float(np.sum(w.samples * w.samples) * w.dt * 1e6)


def time_reverse(w: Waveform) -> Waveform:
    """Reverse the sample order; the step is unchanged."""
    return Waveform(w.samples[::-1].copy(), w.dt, w.start_time)


@dataclass(frozen=True)
class FaultScenario:
    """A short-circuit event: where, how stiff, and at which source phase."""

    position: EdgePosition
    impedance: float  # ohm, >= 0 (0 = ideal bolted fault)
    inception_angle: float  # degrees of source phase at closing time
    record_window: float  # s of observed signal to keep

    def __post_init__(self):
        if self.impedance < 0:
            raise SimulationError("fault impedance must be >= 0")
        if not 0 <= self.inception_angle < 360:
            raise SimulationError("inception angle must be in [0, 360)")
        if not self.record_window > 0:
            raise SimulationError("record_window must be > 0")


@dataclass(frozen=True)
class _EdgeGrid:
    edge_id: str
    endpoints: tuple[str, str]
    n_cells: int
    dx: float
    speed: float


@dataclass(frozen=True)
class DiscretizedNetwork:
    """Immutable grids and coupling tables shared by simulation runs."""

    net: NetworkTopology
    dt: float
    node_order: tuple[str, ...]
    grids: tuple[_EdgeGrid, ...]
    # static kernel tables
    e_n: np.ndarray = field(repr=False)
    e_ca: np.ndarray = field(repr=False)
    e_cb: np.ndarray = field(repr=False)
    e_dv: np.ndarray = field(repr=False)
    e_pt_a: np.ndarray = field(repr=False)  # C'*dx/dt per edge (interior points)
    n_a: np.ndarray = field(repr=False)
    n_g_base: np.ndarray = field(repr=False)
    inc_ptr: np.ndarray = field(repr=False)
    inc_e: np.ndarray = field(repr=False)
    inc_k: np.ndarray = field(repr=False)
    inc_sign: np.ndarray = field(repr=False)
    halo_ptr: np.ndarray = field(repr=False)
    halo_e: np.ndarray = field(repr=False)
    halo_k: np.ndarray = field(repr=False)
    max_cells: int = 0
    round_trip: float = 0.0  # 2 * largest node-to-node travel time, s

    def node_index(self, node: str) -> int:
        return self.node_order.index(node)

    def row_of(self, edge_id: str) -> int:
        for r, g in enumerate(self.grids):
            if g.edge_id == edge_id:
                return r
        raise SimulationError(f"unknown edge id {edge_id!r}")

    def snap(self, pos: EdgePosition) -> tuple[str, int, int]:
        """Snap a position to the grid.

        Returns ``("node", node_idx, 0)`` when the nearest boundary is an
        edge endpoint, else ``("interior", row, cell_boundary_index)``.
        """
        row = self.row_of(pos.edge)
        g = self.grids[row]
        length = g.n_cells * g.dx
        if not -1e-9 <= pos.offset <= length + 1e-9:
            raise SimulationError(
                f"offset {pos.offset} outside edge {pos.edge} (length {length})"
            )
        k = int(round(pos.offset / g.dx))
        k = min(max(k, 0), g.n_cells)
        moved = abs(k * g.dx - pos.offset)
        if moved > 1e-6 * g.dx:
            warnings.warn(
                f"position {pos.edge}@{pos.offset:.6g} m snapped to the cell "
                f"boundary {k * g.dx:.6g} m ({moved:.3g} m away)",
                GridSnapWarning,
                stacklevel=3,
            )
        if k == 0:
            return ("node", self.node_index(g.endpoints[0]), 0)
        if k == g.n_cells:
            return ("node", self.node_index(g.endpoints[1]), 0)
        return ("interior", row, k)


def discretize(net: NetworkTopology, target_dx: float) -> DiscretizedNetwork:
    """Build per-edge grids with dx <= target_dx and a common CFL time step."""
    if not target_dx > 0:
        raise SimulationError("target_dx must be > 0")
    shortest = min(e.length for e in net.edges)
    if target_dx > shortest + 1e-9:
        raise SimulationError(
            f"target_dx {target_dx} m exceeds the shortest edge length {shortest} m"
        )
    node_order = tuple(sorted(net.nodes))
    nidx = {n: i for i, n in enumerate(node_order)}
    grids = []
    for e in net.edges:
        n_cells = max(1, math.ceil(e.length / target_dx - 1e-9))
        grids.append(
            _EdgeGrid(e.edge_id, e.endpoints, n_cells, e.length / n_cells,
                      propagation_speed(e.params))
        )
    dt = 0.9 * min(g.dx / g.speed for g in grids)

    ne = len(grids)
    nn = len(node_order)
    e_n = np.array([g.n_cells for g in grids], dtype=np.int64)
    e_ca = np.empty(ne)
    e_cb = np.empty(ne)
    e_dv = np.empty(ne)
    e_pt_a = np.empty(ne)
    n_a = np.zeros(nn)
    for r, (grid, edge) in enumerate(zip(grids, net.edges)):
        lp = edge.params
        denom = lp.inductance_per_m / dt + 0.5 * lp.resistance_per_m
        e_ca[r] = (lp.inductance_per_m / dt - 0.5 * lp.resistance_per_m) / denom
        e_cb[r] = (1.0 / grid.dx) / denom
        e_dv[r] = dt / (lp.capacitance_per_m * grid.dx)
        e_pt_a[r] = lp.capacitance_per_m * grid.dx / dt
        half_cell = 0.5 * lp.capacitance_per_m * grid.dx / dt
        n_a[nidx[grid.endpoints[0]]] += half_cell
        n_a[nidx[grid.endpoints[1]]] += half_cell

    n_g_base = np.zeros(nn)
    for t in net.terminations:
        n_g_base[nidx[t.node]] += 1.0 / t.impedance
    n_g_base[nidx[net.source.node]] += 1.0 / net.source.series_impedance

    inc: list[list[tuple[int, int, float]]] = [[] for _ in range(nn)]
    halo: list[list[tuple[int, int]]] = [[] for _ in range(nn)]
    for r, g in enumerate(grids):
        a, b = nidx[g.endpoints[0]], nidx[g.endpoints[1]]
        inc[a].append((r, 0, -1.0))            # current leaving node a
        inc[b].append((r, g.n_cells - 1, 1.0))  # current entering node b
        halo[a].append((r, 0))
        halo[b].append((r, g.n_cells))
    inc_ptr = np.zeros(nn + 1, dtype=np.int64)
    halo_ptr = np.zeros(nn + 1, dtype=np.int64)
    inc_flat: list[tuple[int, int, float]] = []
    halo_flat: list[tuple[int, int]] = []
    for i in range(nn):
        inc_flat.extend(inc[i])
        halo_flat.extend(halo[i])
        inc_ptr[i + 1] = len(inc_flat)
        halo_ptr[i + 1] = len(halo_flat)

    return DiscretizedNetwork(
        net=net,
        dt=dt,
        node_order=node_order,
        grids=tuple(grids),
        e_n=e_n,
        e_ca=e_ca,
        e_cb=e_cb,
        e_dv=e_dv,
        e_pt_a=e_pt_a,
        n_a=n_a,
        n_g_base=n_g_base,
        inc_ptr=inc_ptr,
        inc_e=np.array([x[0] for x in inc_flat], dtype=np.int64),
        inc_k=np.array([x[1] for x in inc_flat], dtype=np.int64),
        inc_sign=np.array([x[2] for x in inc_flat]),
        halo_ptr=halo_ptr,
        halo_e=np.array([x[0] for x in halo_flat], dtype=np.int64),
        halo_k=np.array([x[1] for x in halo_flat], dtype=np.int64),
        max_cells=int(e_n.max()),
        round_trip=2.0 * max_travel_time(net),
    )


def default_record_window(net: NetworkTopology) -> float:
    """Default observation window: 20x the largest one-way travel time."""
    return 20.0 * max_travel_time(net)


# ---------------------------------------------------------------------------
# Run assembly
# ---------------------------------------------------------------------------

_EMPTY_I = np.empty(0, dtype=np.int64)
_EMPTY_F = np.empty(0)


class _Run:
    """Mutable state and extras for one kernel invocation."""

    def __init__(self, dnet: DiscretizedNetwork):
        self.dnet = dnet
        nn = len(dnet.node_order)
        self.U = np.zeros(nn)
        self.V2 = np.zeros((len(dnet.grids), dnet.max_cells + 1))
        self.I2 = np.zeros((len(dnet.grids), dnet.max_cells))
        self.n_g = dnet.n_g_base.copy()
        self.drives: list[tuple[int, float, np.ndarray]] = []
        self.atts: list[tuple[int, int, float, float]] = []  # e, k, a, g
        self.clampi: list[tuple[int, int, float]] = []  # e, k, a
        self.clamp_nodes: list[int] = []

    def add_shunt(self, placement: tuple[str, int, int], resistance: float) -> tuple[int, int]:
        """Attach a resistive shunt to ground; returns (rec_mode, rec_i0)."""
        kind, i, k = placement
        if resistance == 0.0:
            if kind == "node":
                self.clamp_nodes.append(i)
                return (_kernel.REC_CLAMP_NODE_I, i)
            self.clampi.append((i, k, self.dnet.e_pt_a[i]))
            return (_kernel.REC_CLAMP_POINT_I, len(self.clampi) - 1)
        g = 1.0 / resistance
        if kind == "node":
            self.n_g[i] += g
            return (_kernel.REC_NODE_BRANCH_I, i)
        self.atts.append((i, k, self.dnet.e_pt_a[i], g))
        return (_kernel.REC_ATT_I, len(self.atts) - 1)

    def run(self, nsteps: int, rec_mode: int, rec_i0: int, rec_g: float) -> np.ndarray:
        d = self.dnet
        voltage_rec = rec_mode in (_kernel.REC_NODE_V, _kernel.REC_POINT_V)
        out = np.zeros(nsteps + 1 if voltage_rec else nsteps)
        if rec_mode == _kernel.REC_NODE_V:
            out[0] = self.U[rec_i0]
        elif rec_mode == _kernel.REC_POINT_V:
            out[0] = self.V2[rec_i0 // self.V2.shape[1], rec_i0 % self.V2.shape[1]]
        # halos must mirror node voltages before the first step
        for nd in range(len(d.node_order)):
            for p in range(d.halo_ptr[nd], d.halo_ptr[nd + 1]):
                self.V2[d.halo_e[p], d.halo_k[p]] = self.U[nd]
        if self.drives:
            drive_node = np.array([x[0] for x in self.drives], dtype=np.int64)
            drive_g = np.array([x[1] for x in self.drives])
            drive_emf = np.vstack([x[2] for x in self.drives])
        else:
            drive_node, drive_g = _EMPTY_I, _EMPTY_F
            drive_emf = np.zeros((0, nsteps))
        att_e = np.array([x[0] for x in self.atts], dtype=np.int64) if self.atts else _EMPTY_I
        att_k = np.array([x[1] for x in self.atts], dtype=np.int64) if self.atts else _EMPTY_I
        att_a = np.array([x[2] for x in self.atts]) if self.atts else _EMPTY_F
        att_g = np.array([x[3] for x in self.atts]) if self.atts else _EMPTY_F
        ci_e = np.array([x[0] for x in self.clampi], dtype=np.int64) if self.clampi else _EMPTY_I
        ci_k = np.array([x[1] for x in self.clampi], dtype=np.int64) if self.clampi else _EMPTY_I
        ci_a = np.array([x[2] for x in self.clampi]) if self.clampi else _EMPTY_F
        cn = np.array(sorted(self.clamp_nodes), dtype=np.int64) if self.clamp_nodes else _EMPTY_I
        _kernel.step_loop(
            nsteps, self.U, self.V2, self.I2,
            d.e_n, d.e_ca, d.e_cb, d.e_dv,
            d.n_a, self.n_g,
            d.inc_ptr, d.inc_e, d.inc_k, d.inc_sign,
            d.halo_ptr, d.halo_e, d.halo_k,
            drive_node, drive_g, drive_emf,
            att_e, att_k, att_a, att_g,
            ci_e, ci_k, ci_a, cn,
            rec_mode, rec_i0, rec_g,
            out,
        )
        return out


def _source_emf(dnet: DiscretizedNetwork, nsteps: int, angle_deg: float) -> np.ndarray:
    src = dnet.net.source
    t_half = (np.arange(nsteps) + 0.5) * dnet.dt
    phase = math.radians(angle_deg)
    return src.amplitude * np.sin(2.0 * math.pi * src.frequency * t_half + phase)


def _phasor_nodal_solve(dnet: DiscretizedNetwork, angle_deg: float):
    """Nodal phasor solution of the healthy network at the source frequency.

    Uses the exact distributed-line two-port admittances, so the returned
    node phasors (cos-convention, ``v(t) = Re[V e^{jwt}]``) are the true AC
    steady state of the continuous model.
    """
    net = dnet.net
    src = net.source
    omega = 2.0 * math.pi * src.frequency
    nn = len(dnet.node_order)
    nidx = {n: i for i, n in enumerate(dnet.node_order)}
    Y = np.zeros((nn, nn), dtype=complex)
    rhs = np.zeros(nn, dtype=complex)
    series = []
    for e in net.edges:
        lp = e.params
        z = lp.resistance_per_m + 1j * omega * lp.inductance_per_m
        y = 1j * omega * lp.capacitance_per_m
        gamma = np.sqrt(z * y)
        zc = np.sqrt(z / y)
        series.append((gamma, zc))
        gl = gamma * e.length
        d = 1.0 / (zc * np.sinh(gl))
        a, b = nidx[e.endpoints[0]], nidx[e.endpoints[1]]
        Y[a, a] += np.cosh(gl) * d
        Y[b, b] += np.cosh(gl) * d
        Y[a, b] -= d
        Y[b, a] -= d
    for t in net.terminations:
        Y[nidx[t.node], nidx[t.node]] += 1.0 / t.impedance
    Y[nidx[src.node], nidx[src.node]] += 1.0 / src.series_impedance
    phase = math.radians(angle_deg)
    rhs[nidx[src.node]] = src.amplitude * np.exp(1j * (phase - 0.5 * math.pi)) / src.series_impedance
    return np.linalg.solve(Y, rhs), nidx, series, omega


def _phasor_init(run: _Run, angle_deg: float) -> None:
    """Load the AC steady state of the healthy network into the run state."""
    dnet = run.dnet
    u, nidx, series, omega = _phasor_nodal_solve(dnet, angle_deg)
    run.U[:] = np.real(u)
    rot = np.exp(-0.5j * omega * dnet.dt)  # currents live half a step earlier
    for r, (grid, e) in enumerate(zip(dnet.grids, dnet.net.edges)):
        gamma, zc = series[r]
        va = u[nidx[e.endpoints[0]]]
        vb = u[nidx[e.endpoints[1]]]
        length = grid.n_cells * grid.dx
        sgl = np.sinh(gamma * length)
        xb = grid.dx * np.arange(grid.n_cells + 1)
        run.V2[r, : grid.n_cells + 1] = np.real(
            (va * np.sinh(gamma * (length - xb)) + vb * np.sinh(gamma * xb)) / sgl
        )
        xc = grid.dx * (np.arange(grid.n_cells) + 0.5)
        cur = (va * np.cosh(gamma * (length - xc)) - vb * np.cosh(gamma * xc)) / (zc * sgl)
        run.I2[r, : grid.n_cells] = np.real(cur * rot)


def prefault_voltage_phasor(dnet: DiscretizedNetwork, pos: EdgePosition,
                            angle_deg: float = 0.0) -> complex:
    """Complex pre-fault voltage phasor at a position (cos-convention)."""
    u, nidx, series, _ = _phasor_nodal_solve(dnet, angle_deg)
    edge = dnet.net.edge_by_id(pos.edge)
    gamma = series[[e.edge_id for e in dnet.net.edges].index(pos.edge)][0]
    va = u[nidx[edge.endpoints[0]]]
    vb = u[nidx[edge.endpoints[1]]]
    x = pos.offset
    return complex(
        (va * np.sinh(gamma * (edge.length - x)) + vb * np.sinh(gamma * x))
        / np.sinh(gamma * edge.length)
    )


def simulate_fault(dnet: DiscretizedNetwork, scenario: FaultScenario) -> Waveform:
    """Observed fault transient: faulted run minus identical healthy run.

    Both runs start from the healthy AC steady state with the source phased
    so its voltage phase equals the inception angle at the closing time
    ``t = 0``; the fault shunt is active from the first step onward.
    """
    dnet_dt = dnet.dt
    one_way = travel_time(dnet.net, scenario.position, dnet.net.observation_node)
    if scenario.record_window < one_way:
        raise SimulationError(
            f"record_window {scenario.record_window:.3e} s is shorter than the "
            f"one-way travel time {one_way:.3e} s from fault to observation node"
        )
    nsteps = int(math.ceil(scenario.record_window / dnet_dt))
    obs = dnet.node_index(dnet.net.observation_node)
    emf = _source_emf(dnet, nsteps, scenario.inception_angle)
    src_idx = dnet.node_index(dnet.net.source.node)
    src_g = 1.0 / dnet.net.source.series_impedance

    healthy = _Run(dnet)
    _phasor_init(healthy, scenario.inception_angle)
    healthy.drives.append((src_idx, src_g, emf))
    ref = healthy.run(nsteps, _kernel.REC_NODE_V, obs, 0.0)

    faulted = _Run(dnet)
    _phasor_init(faulted, scenario.inception_angle)
    faulted.drives.append((src_idx, src_g, emf))
    faulted.add_shunt(dnet.snap(scenario.position), scenario.impedance)
    sig = faulted.run(nsteps, _kernel.REC_NODE_V, obs, 0.0)

    return Waveform(sig - ref, dnet_dt, 0.0)


def _resample_to_half_steps(w: Waveform, dt: float, nsteps: int) -> np.ndarray:
    """Waveform value at (m + 1/2) * dt, linearly interpolated, 0 past the end."""
    t = (np.arange(nsteps) + 0.5) * dt
    src_t = w.dt * np.arange(w.samples.size)
    return np.interp(t, src_t, w.samples, left=w.samples[0], right=0.0)


def _injection_drive(dnet: DiscretizedNetwork) -> tuple[int, float]:
    """Node index and conductance of the branch the drive sits behind."""
    net = dnet.net
    obs = net.observation_node
    term = net.termination_at(obs)
    if term is not None:
        return dnet.node_index(obs), 1.0 / term.impedance
    if net.source.node == obs:
        return dnet.node_index(obs), 1.0 / net.source.series_impedance
    raise SimulationError(
        f"observation node {obs!r} has no termination or source branch to drive"
    )


def back_inject(dnet: DiscretizedNetwork, reversed_wf: Waveform,
                guess: EdgePosition, guess_impedance: float) -> Waveform:
    """Drive the reversed record into the healthy network, AC source silent.

    Returns the current through the guessed shunt branch over the injection
    window (drive duration plus five of the longest round trips, so that late
    reflections still contribute to the energy sum).
    """
    if reversed_wf.samples.size == 0:
        raise SimulationError("empty drive waveform")
    if guess_impedance < 0:
        raise SimulationError("guess impedance must be >= 0")
    window = reversed_wf.duration + 5.0 * dnet.round_trip
    nsteps = max(1, int(math.ceil(window / dnet.dt)))
    run = _Run(dnet)
    node, g = _injection_drive(dnet)
    run.drives.append((node, g, _resample_to_half_steps(reversed_wf, dnet.dt, nsteps)))
    rec_mode, rec_i0 = run.add_shunt(dnet.snap(guess), guess_impedance)
    rec_g = 0.0
    if rec_mode == _kernel.REC_NODE_BRANCH_I:
        rec_g = 1.0 / guess_impedance
    out = run.run(nsteps, rec_mode, rec_i0, rec_g)
    return Waveform(out, dnet.dt, 0.5 * dnet.dt)


def probe_injection(dnet: DiscretizedNetwork, drive_wf: Waveform,
                    at: EdgePosition | str) -> Waveform:
    """Voltage response at a point/node under the back-injection drive.

    Same drive arrangement as :func:`back_inject` but with no guess branch;
    useful for pulse-reflection and energy-transport experiments.
    """
    window = drive_wf.duration + 5.0 * dnet.round_trip
    nsteps = max(1, int(math.ceil(window / dnet.dt)))
    run = _Run(dnet)
    node, g = _injection_drive(dnet)
    run.drives.append((node, g, _resample_to_half_steps(drive_wf, dnet.dt, nsteps)))
    if isinstance(at, str):
        rec_mode, rec_i0 = _kernel.REC_NODE_V, dnet.node_index(at)
    else:
        kind, i, k = dnet.snap(at)
        if kind == "node":
            rec_mode, rec_i0 = _kernel.REC_NODE_V, i
        else:
            rec_mode, rec_i0 = _kernel.REC_POINT_V, i * run.V2.shape[1] + k
    out = run.run(nsteps, rec_mode, rec_i0, 0.0)
    return Waveform(out, dnet.dt, 0.0)


# ---------------------------------------------------------------------------
# Waveform CSV
# ---------------------------------------------------------------------------

def write_waveform_csv(w: Waveform, path) -> None:
    """Write ``time_us,value`` rows with 9 significant digits."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time_us", "value"])
        for t, v in zip(w.times, w.samples):
            writer.writerow([f"{t * 1e6:.9g}", f"{v:.9g}"])


def read_waveform_csv(path) -> Waveform:
    """Read a waveform written by :func:`write_waveform_csv`."""
    times = []
    values = []
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["time_us", "value"]:
            raise SimulationError(f"{path}: expected 'time_us,value' header")
        for row in reader:
            if not row:
                continue
            times.append(float(row[0]) * 1e-6)
            values.append(float(row[1]))
    if len(values) < 1:
        raise SimulationError(f"{path}: no samples")
    if len(values) == 1:
        return Waveform(np.array(values), 1e-6, times[0])
    dts = np.diff(times)
    dt = float(np.mean(dts))
    if np.max(np.abs(dts - dt)) > 1e-3 * dt:
        raise SimulationError(f"{path}: non-uniform sampling")
    return Waveform(np.array(values), dt, times[0])
