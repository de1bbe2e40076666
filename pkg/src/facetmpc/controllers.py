"""The five controller engines behind one stepping interface.

* CMPC: one online QP over all inputs per step.
* DiMPC: cooperative iteration, each local controller re-solving its QP
  online against the latest broadcast input plans, blended with adaptive
  secant (Wegstein) weights until the plan stops moving.
* I-mpDiMPC: the same iteration with explicit piecewise-affine lookups in
  place of online QPs.
* IF-mpDiMPC / FACET-DiMPC: iteration-free stepping that solves the
  assembled per-region affine laws as one linear system per region
  combination, searching only the current regions and their neighbors
  (hyperplane neighbors or LP-verified facet neighbors) and reverting to
  the iterative explicit path when no combination verifies.
"""

from __future__ import annotations

import enum
import itertools
import time
from dataclasses import dataclass

import numpy as np

from . import errors
from .adjacency import AdjacencyGraph, build_graph, hyperplane_graph
from .mpqp import (MpcProblem, MpQpData, MpSolution, build_condensed,
                   enumerate_regions, evaluate_explicit, online_solution)
from .numeric import DEFAULT_TOL, QpStatus, ToleranceConfig
from .plants import Plant

# region-membership slack when verifying a solved input combination
COMBO_VERIFY_TOL = 1e-8

# pivot threshold treating an assembled (I - L) system as singular
COMBO_PIVOT_RTOL = 1e-10


class ControllerKind(enum.Enum):
    CMPC = "cmpc"
    DIMPC = "dimpc"
    I_MPDIMPC = "impdimpc"
    IF_MPDIMPC = "ifmpdimpc"
    FACET_DIMPC = "facet"


class IterationMode(enum.Enum):
    ONLINE_QP = "online_qp"
    EXPLICIT = "explicit"


class NeighborMode(enum.Enum):
    HYPERPLANE = "hyperplane"
    FACET = "facet"


@dataclass(frozen=True)
class IterConfig:
    epsilon: float = 1e-8
    p_max: int = 100
    w_init: float = 0.0
    w_clamp: tuple[float, float] = (-5.0, 0.9)

    def __post_init__(self):
        if self.epsilon <= 0 or self.p_max < 1 or self.w_clamp[0] >= self.w_clamp[1]:
            raise errors.DimensionMismatch("invalid iteration configuration")


@dataclass
class StepMetrics:
    iterations: int = 0
    data_transfers: int = 0
    combos_checked: int = 0
    fallback_used: bool = False
    region_ids: tuple[int, ...] | None = None
    solve_micros: int = 0
    converged: bool = True


@dataclass(frozen=True)
class StepOutcome:
    u_applied: np.ndarray
    U_full: np.ndarray
    metrics: StepMetrics


@dataclass
class ExplicitArtifacts:
    """Per-plant offline data shared by any number of controllers."""

    plant: Plant
    centralized_qp: MpQpData | None = None
    local_qps: list[MpQpData] | None = None
    solutions: list[MpSolution] | None = None
    hyper_graphs: list[AdjacencyGraph] | None = None
    facet_graphs: list[AdjacencyGraph] | None = None


_NEEDS = {
    ControllerKind.CMPC: ("centralized_qp",),
    ControllerKind.DIMPC: ("local_qps",),
    ControllerKind.I_MPDIMPC: ("solutions",),
    ControllerKind.IF_MPDIMPC: ("solutions", "hyper_graphs"),
    ControllerKind.FACET_DIMPC: ("solutions", "facet_graphs"),
}


def prepare_artifacts(plant: Plant, kinds, *, existing: ExplicitArtifacts | None = None,
                      tol: ToleranceConfig = DEFAULT_TOL) -> ExplicitArtifacts:
    """Build (or extend) the offline artifacts required by ``kinds``."""
    art = existing or ExplicitArtifacts(plant)
    needed = {name for kind in kinds for name in _NEEDS[ControllerKind(kind)]}
    if "centralized_qp" in needed and art.centralized_qp is None:
        art.centralized_qp = build_condensed(MpcProblem.from_plant(plant))
    if needed & {"local_qps", "solutions", "hyper_graphs", "facet_graphs"}:
        if art.local_qps is None:
            art.local_qps = [build_condensed(MpcProblem.from_plant(plant, controller=i))
                             for i in range(plant.M)]
    if needed & {"solutions", "hyper_graphs", "facet_graphs"}:
        if art.solutions is None:
            art.solutions = [
                enumerate_regions(q, tol=tol, provenance={"controller": i})
                for i, q in enumerate(art.local_qps)]
    if "hyper_graphs" in needed and art.hyper_graphs is None:
        art.hyper_graphs = [hyperplane_graph(s) for s in art.solutions]
    if "facet_graphs" in needed and art.facet_graphs is None:
        art.facet_graphs = [build_graph(s, tol=tol) for s in art.solutions]
    return art


def _split_theta_columns(K, layout):
    """Split a gain matrix into its state part and per-owner input parts."""
    Kx = K[:, layout.x_slice]
    parts = {owner: K[:, sl] for owner, sl in layout.block_slices()}
    return Kx, parts


def solve_combination(solutions, combo, x, *, pivot_rtol=COMBO_PIVOT_RTOL,
                      verify_tol=COMBO_VERIFY_TOL, diagnostics=None):
    """Solve the simultaneous affine laws selected by one region combination.

    Returns the stacked input plan [U_1; ...; U_M] when the assembled
    linear system is well posed and every controller's region inequalities
    hold at the solution; otherwise None.  Singular assemblies are counted
    in ``diagnostics['singular_combos']`` when a dict is supplied.
    """
    from .numeric import solve_linear

    x = np.asarray(x, dtype=np.float64).ravel()
    M = len(solutions)
    regs = [solutions[i].regions[combo[i]] for i in range(M)]
    sizes = [reg.K.shape[0] for reg in regs]
    offs = np.concatenate([[0], np.cumsum(sizes)])
    ntot = int(offs[-1])

    A = np.eye(ntot)
    rhs = np.empty(ntot)
    for i, reg in enumerate(regs):
        lay = solutions[i].layout
        Kx, parts = _split_theta_columns(reg.K, lay)
        rows = slice(offs[i], offs[i + 1])
        rhs[rows] = Kx @ x + reg.k
        for owner, Kj in parts.items():
            A[rows, offs[owner]:offs[owner + 1]] -= Kj
    try:
        U = solve_linear(A, rhs, pivot_rtol=pivot_rtol)
    except errors.SingularMatrix:
        if diagnostics is not None:
            diagnostics["singular_combos"] = diagnostics.get("singular_combos", 0) + 1
        return None

    for i, reg in enumerate(regs):
        if reg.region is None:
            continue
        lay = solutions[i].layout
        theta = np.concatenate(
            [x] + [U[offs[j]:offs[j + 1]] for j, _ in lay.blocks])
        if float((reg.region.Phi @ theta - reg.region.phi).max()) > verify_tol:
            return None
    return U


class Controller:
    """Stepping state for one architecture on one plant.

    Owns the warm-start input plan and, for the iteration-free kinds, the
    last accepted region combination.  Not safe for concurrent stepping;
    one instance per simulation run.
    """

    def __init__(self, kind, plant: Plant, *, artifacts: ExplicitArtifacts | None = None,
                 iter_config: IterConfig = IterConfig(),
                 tol: ToleranceConfig = DEFAULT_TOL):
        self.kind = ControllerKind(kind)
        self.plant = plant
        self.iter_config = iter_config
        self.tol = tol
        if artifacts is None:
            artifacts = prepare_artifacts(plant, [self.kind], tol=tol)
        missing = [name for name in _NEEDS[self.kind] if getattr(artifacts, name) is None]
        if missing:
            raise errors.DimensionMismatch(
                f"artifacts missing {missing} for {self.kind.value}")
        self.artifacts = artifacts
        self.diagnostics: dict = {}
        self.reset()

    def reset(self):
        self.last_U_blocks: list[np.ndarray] | None = None
        self.last_regions: tuple[int, ...] | None = None

    # -- helpers ---------------------------------------------------------

    def _block_sizes(self):
        N = self.plant.horizon
        return [N * s.n_u for s in self.plant.subsystems]

    def _zero_blocks(self):
        return [np.zeros(sz) for sz in self._block_sizes()]

    def _theta_for(self, i, x, blocks):
        others = [j for j in range(self.plant.M) if j != i]
        return np.concatenate([x] + [blocks[j] for j in others])

    def _applied_input(self, blocks):
        return np.concatenate([blocks[i][:s.n_u]
                               for i, s in enumerate(self.plant.subsystems)])

    # -- architectures ---------------------------------------------------

    def step(self, x) -> StepOutcome:
        x = np.asarray(x, dtype=np.float64).ravel()
        if self.kind is ControllerKind.CMPC:
            return self.cmpc_step(x)
        if self.kind is ControllerKind.DIMPC:
            return self.dimpc_iterate(x, IterationMode.ONLINE_QP)
        if self.kind is ControllerKind.I_MPDIMPC:
            return self.dimpc_iterate(x, IterationMode.EXPLICIT)
        if self.kind is ControllerKind.IF_MPDIMPC:
            return self.iteration_free_step(x, NeighborMode.HYPERPLANE)
        return self.iteration_free_step(x, NeighborMode.FACET)

    def cmpc_step(self, x) -> StepOutcome:
        start = time.perf_counter_ns()
        res = online_solution(self.artifacts.centralized_qp, x, tol=self.tol)
        if res.status is not QpStatus.OPTIMAL:
            raise errors.InfeasibleOcp("centralized problem infeasible at x")
        U = res.u
        metrics = StepMetrics(iterations=1, data_transfers=0,
                              solve_micros=(time.perf_counter_ns() - start) // 1000)
        return StepOutcome(U[:self.plant.n_u].copy(), U, metrics)

    def _fresh_block(self, i, theta, mode):
        if mode is IterationMode.ONLINE_QP:
            res = online_solution(self.artifacts.local_qps[i], theta, tol=self.tol)
            if res.status is not QpStatus.OPTIMAL:
                raise errors.InfeasibleLocalOcp(f"controller {i} infeasible")
            return res.u
        try:
            u, _ = evaluate_explicit(self.artifacts.solutions[i], theta)
        except errors.OutsideFeasibleSet as exc:
            raise errors.InfeasibleLocalOcp(f"controller {i} infeasible") from exc
        return u

    def _wegstein_weight(self, fresh, fresh_prev, prev, prev2):
        # secant slope of the best-response map along the last step
        denom = prev - prev2
        num = fresh - fresh_prev
        usable = np.abs(denom) > 1e-14 * (1.0 + np.abs(prev))
        s = np.zeros_like(prev)
        s[usable] = num[usable] / denom[usable]
        s_med = float(np.median(s))
        if abs(s_med - 1.0) < 1e-12:
            return 0.0  # secant slope 1 carries no usable information
        lo, hi = self.iter_config.w_clamp
        return float(np.clip(s_med / (s_med - 1.0), lo, hi))

    def dimpc_iterate(self, x, mode: IterationMode) -> StepOutcome:
        """Cooperative iteration: simultaneous local solves, broadcast, and a
        per-subsystem convex-combination update with adaptive weights."""
        start = time.perf_counter_ns()
        cfg = self.iter_config
        M = self.plant.M
        prev = ([blk.copy() for blk in self.last_U_blocks]
                if self.last_U_blocks is not None else self._zero_blocks())
        prev2 = None
        fresh_prev = None
        p = 0
        converged = False
        while p < cfg.p_max:
            p += 1
            fresh = [self._fresh_block(i, self._theta_for(i, x, prev), mode)
                     for i in range(M)]
            blended = []
            for i in range(M):
                if p <= 2 or prev2 is None:
                    w = cfg.w_init
                else:
                    w = self._wegstein_weight(fresh[i], fresh_prev[i],
                                              prev[i], prev2[i])
                blended.append(w * prev[i] + (1.0 - w) * fresh[i])
            delta = max(float(np.abs(blended[i] - prev[i]).max()) for i in range(M))
            prev2 = prev
            prev = blended
            fresh_prev = fresh
            if delta <= cfg.epsilon:
                converged = True
                break

        self.last_U_blocks = prev
        region_ids = None
        if mode is IterationMode.EXPLICIT:
            ids = []
            for i in range(M):
                rid = self.artifacts.solutions[i].locate(self._theta_for(i, x, prev))
                if rid is None:
                    raise errors.InfeasibleLocalOcp(
                        f"converged plan of controller {i} lies in no region")
                ids.append(rid)
            region_ids = tuple(ids)
            self.last_regions = region_ids

        metrics = StepMetrics(iterations=p, data_transfers=p * M,
                              region_ids=region_ids, converged=converged,
                              solve_micros=(time.perf_counter_ns() - start) // 1000)
        return StepOutcome(self._applied_input(prev), np.concatenate(prev), metrics)

    def iteration_free_step(self, x, neighbor_mode: NeighborMode) -> StepOutcome:
        start = time.perf_counter_ns()
        graphs = (self.artifacts.hyper_graphs
                  if neighbor_mode is NeighborMode.HYPERPLANE
                  else self.artifacts.facet_graphs)
        solutions = self.artifacts.solutions
        sizes = self._block_sizes()
        offs = np.concatenate([[0], np.cumsum(sizes)])

        if self.last_regions is None:
            # first step: one explicit iterative pass seeds the regions;
            # the per-step broadcast is still a single transfer
            out = self.dimpc_iterate(x, IterationMode.EXPLICIT)
            metrics = StepMetrics(iterations=out.metrics.iterations,
                                  data_transfers=1, combos_checked=0,
                                  region_ids=out.metrics.region_ids,
                                  converged=out.metrics.converged,
                                  solve_micros=(time.perf_counter_ns() - start) // 1000)
            return StepOutcome(out.u_applied, out.U_full, metrics)

        candidates = []
        for i, g in enumerate(graphs):
            last = self.last_regions[i]
            nb = g.neighbors.get(last)
            if nb is None:
                candidates = None  # graph has no data for this region
                break
            candidates.append(sorted({last, *nb}))

        attempts = 0
        if candidates is not None:
            current = tuple(self.last_regions)
            ordered = itertools.chain(
                [current],
                (c for c in itertools.product(*candidates) if c != current))
            for combo in ordered:
                attempts += 1
                U = solve_combination(solutions, combo, x,
                                      diagnostics=self.diagnostics)
                if U is not None:
                    blocks = [U[offs[i]:offs[i + 1]] for i in range(self.plant.M)]
                    self.last_U_blocks = blocks
                    self.last_regions = tuple(combo)
                    metrics = StepMetrics(
                        iterations=0, data_transfers=1, combos_checked=attempts,
                        region_ids=tuple(combo),
                        solve_micros=(time.perf_counter_ns() - start) // 1000)
                    return StepOutcome(self._applied_input(blocks), U, metrics)

        out = self.dimpc_iterate(x, IterationMode.EXPLICIT)
        metrics = StepMetrics(iterations=out.metrics.iterations,
                              data_transfers=1 + out.metrics.data_transfers,
                              combos_checked=attempts, fallback_used=True,
                              region_ids=out.metrics.region_ids,
                              converged=out.metrics.converged,
                              solve_micros=(time.perf_counter_ns() - start) // 1000)
        return StepOutcome(out.u_applied, out.U_full, metrics)
