"""Closed-loop simulation, metrics aggregation, and trace serialization."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import errors, plants
from .controllers import Controller, ControllerKind, IterConfig, StepMetrics
from .plants import Plant, plant_hash

# settling criterion: every state within this fraction of its trace scale
SETTLE_FRACTION = 0.0002

TRACE_COLUMNS = ("step", "x", "u", "iterations", "transfers", "combos",
                 "fallback", "micros")


@dataclass
class Trace:
    plant_hash: str
    kind: str
    x0: np.ndarray
    steps_requested: int
    states: np.ndarray              # (completed+1) x n_x
    inputs: np.ndarray              # completed x n_u
    metrics: list[StepMetrics]
    status: str = "ok"

    @property
    def steps_completed(self) -> int:
        return self.inputs.shape[0]


def run_closed_loop(plant: Plant, controller, x0, steps: int, *,
                    iter_config: IterConfig = IterConfig()) -> Trace:
    """Alternate controller and plant for ``steps`` steps.

    ``controller`` may be a ControllerKind (a fresh Controller is built,
    computing any explicit artifacts on the fly) or a prepared Controller.
    Controller errors truncate the trace with the error name as status.
    """
    if not isinstance(controller, Controller):
        controller = Controller(controller, plant, iter_config=iter_config)
    x = np.asarray(x0, dtype=np.float64).ravel()
    states = [x.copy()]
    inputs = []
    metrics: list[StepMetrics] = []
    status = "ok"
    for _ in range(steps):
        try:
            out = controller.step(x)
        except errors.FacetMpcError as exc:
            status = type(exc).__name__
            break
        inputs.append(out.u_applied.copy())
        metrics.append(out.metrics)
        x = plants.step(plant, x, out.u_applied)
        states.append(x.copy())
    return Trace(plant_hash(plant), controller.kind.value, states[0],
                 steps, np.asarray(states),
                 np.asarray(inputs).reshape(len(inputs), plant.n_u),
                 metrics, status)


def draw_feasible_initial_state(plant: Plant, seed: int, qp=None) -> np.ndarray:
    """Initial state within the 40% box from which the centralized problem
    is feasible (rejection sampled)."""
    from .mpqp import MpcProblem, build_condensed
    from .numeric import lp_feasible_point

    if qp is None:
        qp = build_condensed(MpcProblem.from_plant(plant))

    def check(x):
        return lp_feasible_point(qp.G, qp.b + qp.F @ x) is not None

    return plants.draw_initial_state(plant, seed, feasibility_check=check)


def subsystem_outputs(trace: Trace, plant: Plant) -> np.ndarray:
    """Per-step outputs y_i(k): the sum of each subsystem's states."""
    cols = []
    for sl in plant.state_slices():
        cols.append(trace.states[:, sl].sum(axis=1))
    return np.column_stack(cols)


def settling_steps(trace: Trace) -> int:
    """First step index after which every state stays within
    ``SETTLE_FRACTION`` of its per-state trace scale; ``steps + 1`` when the
    trace never settles."""
    states = np.abs(trace.states)
    steps = states.shape[0] - 1
    scale = states.max(axis=0)
    thresh = SETTLE_FRACTION * scale
    ok = np.all(states <= thresh[None, :], axis=1)
    settled_from = steps + 1
    for k in range(steps, -1, -1):
        if ok[k]:
            settled_from = k
        else:
            break
    return settled_from


@dataclass(frozen=True)
class RunSummary:
    max_iterations: int
    avg_iterations: float
    total_transfers: int
    total_combos: int
    fallback_count: int
    settling_steps: int
    max_dev_vs_reference: float | None
    steps_completed: int
    nonconverged_steps: int
    status: str
    median_step_micros: float


def summarize(trace: Trace, reference: Trace | None = None) -> RunSummary:
    iters = [m.iterations for m in trace.metrics] or [0]
    micros = [m.solve_micros for m in trace.metrics] or [0]
    dev = None
    if reference is not None:
        if reference.plant_hash != trace.plant_hash:
            raise errors.DimensionMismatch("reference trace is for another plant")
        n = min(trace.states.shape[0], reference.states.shape[0])
        dev = float(np.abs(trace.states[:n] - reference.states[:n]).max())
    return RunSummary(
        max_iterations=max(iters),
        avg_iterations=float(np.mean(iters)),
        total_transfers=sum(m.data_transfers for m in trace.metrics),
        total_combos=sum(m.combos_checked for m in trace.metrics),
        fallback_count=sum(m.fallback_used for m in trace.metrics),
        settling_steps=settling_steps(trace),
        max_dev_vs_reference=dev,
        steps_completed=trace.steps_completed,
        nonconverged_steps=sum(not m.converged for m in trace.metrics),
        status=trace.status,
        median_step_micros=float(np.median(micros)),
    )


def trace_header(n_x: int, n_u: int) -> list[str]:
    return (["step"]
            + [f"x{i}" for i in range(n_x)]
            + [f"u{i}" for i in range(n_u)]
            + ["iterations", "transfers", "combos", "fallback", "micros"])


def write_trace_csv(trace: Trace, path) -> None:
    """One row per executed step; floats use shortest round-trip repr so a
    replay from the CSV is bit-exact."""
    n_x = trace.states.shape[1]
    n_u = trace.inputs.shape[1] if trace.steps_completed else 0
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(trace_header(n_x, n_u))
        for k in range(trace.steps_completed):
            m = trace.metrics[k]
            writer.writerow(
                [k]
                + [repr(v) for v in trace.states[k]]
                + [repr(v) for v in trace.inputs[k]]
                + [m.iterations, m.data_transfers, m.combos_checked,
                   int(m.fallback_used), m.solve_micros])


def read_trace_csv(path, plant: Plant | None = None) -> Trace:
    """Rebuild a Trace from CSV; the final state is recomputed by stepping
    the plant when one is supplied (otherwise states stop at the last row)."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        n_x = sum(1 for h in header if h.startswith("x") and h[1:].isdigit())
        n_u = sum(1 for h in header if h.startswith("u") and h[1:].isdigit())
        states, inputs, metrics = [], [], []
        for row in reader:
            states.append([float(v) for v in row[1:1 + n_x]])
            inputs.append([float(v) for v in row[1 + n_x:1 + n_x + n_u]])
            it, tr, cb, fb, us = row[1 + n_x + n_u:]
            metrics.append(StepMetrics(
                iterations=int(it), data_transfers=int(tr), combos_checked=int(cb),
                fallback_used=bool(int(fb)), solve_micros=int(us)))
    states = np.asarray(states)
    inputs = np.asarray(inputs).reshape(len(inputs), -1)
    if plant is not None and len(states):
        final = plants.step(plant, states[-1], inputs[-1])
        states = np.vstack([states, final[None, :]])
    x0 = states[0] if len(states) else np.zeros(0)
    return Trace(plant_hash(plant) if plant is not None else "", "", x0,
                 len(inputs), states, inputs, metrics)
