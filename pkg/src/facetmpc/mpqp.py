"""Condensed parametric QPs and their explicit piecewise-affine solutions.

`build_condensed` eliminates predicted states from a finite-horizon regulator
problem, yielding

    min_U  0.5 U' H U + (theta' H_t + c) U   s.t.   G U <= b + F theta

For the centralized problem theta is the measured state; for a local
controller i it is [x(k); U_1; ...; U_{i-1}; U_{i+1}; ...; U_M] with the
other controllers' input plans treated as parameters.

`enumerate_regions` recovers the explicit solution U*(theta) = K theta + k on
polyhedral critical regions by depth-first enumeration of candidate active
sets, pruned by (a) linear independence of the active rows and (b) an LP
feasibility test of the actively-constrained system over the parameter box.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import errors
from .numeric import (DEFAULT_TOL, QpResult, ToleranceConfig,
                      lp_feasible_point, qp_active_set, solve_linear)
from .plants import Plant
from .polytope import (MIN_FULLDIM_RADIUS, Polytope, chebyshev, normalize,
                       remove_redundant)


@dataclass(frozen=True)
class ThetaLayout:
    """Slot structure of the parameter vector.

    ``blocks`` lists (owner subsystem, width) for the stacked input plans of
    the other controllers, in parameter order; it is empty for the
    centralized problem.  The box is the operational parameter range used
    for sampling and enumeration pruning.
    """

    n_x: int
    blocks: tuple[tuple[int, int], ...]
    theta_lb: np.ndarray
    theta_ub: np.ndarray

    @property
    def n_theta(self) -> int:
        return self.n_x + sum(w for _, w in self.blocks)

    @property
    def x_slice(self) -> slice:
        return slice(0, self.n_x)

    def block_slices(self) -> list[tuple[int, slice]]:
        out, at = [], self.n_x
        for owner, width in self.blocks:
            out.append((owner, slice(at, at + width)))
            at += width
        return out


@dataclass(frozen=True)
class MpcProblem:
    """Finite-horizon regulator data for one controller (or the plant-wide
    problem when ``controller`` is None)."""

    plant: Plant
    horizon: int
    controller: int | None
    Q: tuple[np.ndarray, ...]
    R: tuple[np.ndarray, ...]
    rho: np.ndarray
    terminal_lb: np.ndarray | None = None
    terminal_ub: np.ndarray | None = None

    @classmethod
    def from_plant(cls, plant: Plant, controller: int | None = None, *,
                   horizon: int | None = None, Q=None, R=None, rho=None,
                   terminal: tuple | None = None) -> "MpcProblem":
        Q = tuple(np.eye(s.n_x) if Q is None else np.asarray(Q[i], float)
                  for i, s in enumerate(plant.subsystems))
        R = tuple(np.eye(s.n_u) if R is None else np.asarray(R[i], float)
                  for i, s in enumerate(plant.subsystems))
        rho = np.ones(plant.M) if rho is None else np.asarray(rho, float)
        t_lb, t_ub = (None, None) if terminal is None else terminal
        return cls(plant, horizon or plant.horizon, controller, Q, R, rho,
                   t_lb, t_ub)

    def __post_init__(self):
        if self.horizon < 1:
            raise errors.DimensionMismatch("horizon must be >= 1")
        if self.controller is not None and not (0 <= self.controller < self.plant.M):
            raise errors.DimensionMismatch("controller index out of range")
        if len(self.Q) != self.plant.M or len(self.R) != self.plant.M:
            raise errors.DimensionMismatch("need one Q and R per subsystem")
        if np.any(np.asarray(self.rho) <= 0):
            raise errors.DimensionMismatch("cooperation weights must be positive")
        for i, s in enumerate(self.plant.subsystems):
            if np.linalg.eigvalsh(np.atleast_2d(self.R[i])).min() <= 0:
                raise errors.NotPositiveDefinite(f"R[{i}] must be positive definite")
            if np.linalg.eigvalsh(np.atleast_2d(self.Q[i])).min() < -1e-12:
                raise errors.NotPositiveDefinite(f"Q[{i}] must be PSD")


@dataclass(frozen=True)
class MpQpData:
    H: np.ndarray
    H_t: np.ndarray
    c: np.ndarray
    G: np.ndarray
    b: np.ndarray
    F: np.ndarray
    layout: ThetaLayout

    def __post_init__(self):
        n = self.H.shape[0]
        if self.H.shape[1] != n or self.c.shape[0] != n:
            raise errors.DimensionMismatch("H/c dimensions disagree")
        if self.H_t.shape != (self.layout.n_theta, n):
            raise errors.DimensionMismatch("H_t must be n_theta x n_dec")
        if self.G.shape != (self.b.shape[0], n):
            raise errors.DimensionMismatch("G/b dimensions disagree")
        if self.F.shape != (self.G.shape[0], self.layout.n_theta):
            raise errors.DimensionMismatch("F must be n_c x n_theta")
        if np.abs(self.H - self.H.T).max() > 1e-10 * (1 + np.abs(self.H).max()):
            raise errors.NotPositiveDefinite("H is not symmetric")

    @property
    def n_dec(self) -> int:
        return self.H.shape[0]

    @property
    def n_theta(self) -> int:
        return self.layout.n_theta

    @property
    def n_c(self) -> int:
        return self.G.shape[0]


def _prediction_matrices(plant: Plant, horizon: int):
    from .plants import assemble_global

    A, B_list = assemble_global(plant)
    B = np.hstack(B_list)
    n_x, n_u = A.shape[0], B.shape[1]
    powers = [np.eye(n_x)]
    for _ in range(horizon):
        powers.append(A @ powers[-1])
    gamma = np.vstack([powers[l] for l in range(1, horizon + 1)])
    omega = np.zeros((horizon * n_x, horizon * n_u))
    for l in range(1, horizon + 1):
        for mcol in range(l):
            omega[(l - 1) * n_x:l * n_x, mcol * n_u:(mcol + 1) * n_u] = (
                powers[l - 1 - mcol] @ B)
    return gamma, omega


def _subsystem_columns(plant: Plant, horizon: int) -> list[list[int]]:
    """Per-subsystem decision columns of the time-major stacked input plan."""
    n_u = plant.n_u
    offsets = plant.input_slices()
    cols = []
    for j, sl in enumerate(offsets):
        cols.append([l * n_u + t for l in range(horizon)
                     for t in range(sl.start, sl.stop)])
    return cols


def build_condensed(p: MpcProblem) -> MpQpData:
    """Condense an MpcProblem into parametric-QP matrices.

    Constraint row order: for each step l = 1..N the state upper bounds then
    lower bounds, followed for each step l = 0..N-1 by the input upper then
    lower bounds (own inputs only for a local controller), then optional
    terminal-box rows.
    """
    plant, N = p.plant, p.horizon
    n_x, n_u = plant.n_x, plant.n_u
    gamma, omega = _prediction_matrices(plant, N)

    qbar = np.zeros((n_x, n_x))
    rbar = np.zeros((n_u, n_u))
    for i, (ssl, usl) in enumerate(zip(plant.state_slices(), plant.input_slices())):
        qbar[ssl, ssl] = p.rho[i] * np.atleast_2d(p.Q[i])
        rbar[usl, usl] = p.rho[i] * np.atleast_2d(p.R[i])
    qt = np.kron(np.eye(N), qbar)
    rt = np.kron(np.eye(N), rbar)

    H_full = omega.T @ qt @ omega + rt
    Hx_full = gamma.T @ qt @ omega  # n_x rows, one column per decision

    # state rows (shared by centralized and local forms)
    gs, fs, bs = [], [], []
    for l in range(1, N + 1):
        gam_l = gamma[(l - 1) * n_x:l * n_x]
        ome_l = omega[(l - 1) * n_x:l * n_x]
        gs.extend([ome_l, -ome_l])
        fs.extend([-gam_l, gam_l])
        bs.extend([plant.x_ub, -plant.x_lb])
    if p.terminal_lb is not None:
        gam_N = gamma[(N - 1) * n_x:]
        ome_N = omega[(N - 1) * n_x:]
        term = [(ome_N, -gam_N, np.asarray(p.terminal_ub, float)),
                (-ome_N, gam_N, -np.asarray(p.terminal_lb, float))]
    else:
        term = []

    if p.controller is None:
        rows_g = list(gs)
        rows_f = list(fs)
        rows_b = list(bs)
        for l in range(N):
            sel = np.zeros((n_u, N * n_u))
            sel[:, l * n_u:(l + 1) * n_u] = np.eye(n_u)
            rows_g.extend([sel, -sel])
            rows_f.extend([np.zeros((n_u, n_x)), np.zeros((n_u, n_x))])
            rows_b.extend([plant.u_ub, -plant.u_lb])
        for g_t, f_t, b_t in term:
            rows_g.append(g_t)
            rows_f.append(f_t)
            rows_b.append(b_t)
        layout = ThetaLayout(n_x, (), plant.x_lb.copy(), plant.x_ub.copy())
        return MpQpData(H_full, Hx_full, np.zeros(N * n_u),
                        np.vstack(rows_g), np.concatenate(rows_b),
                        np.vstack(rows_f), layout)

    i = p.controller
    cols = _subsystem_columns(plant, N)
    own = cols[i]
    others = [j for j in range(plant.M) if j != i]
    n_i = len(own)

    H_i = H_full[np.ix_(own, own)]
    ht_parts = [Hx_full[:, own]]
    for j in others:
        ht_parts.append(H_full[np.ix_(cols[j], own)])
    H_t = np.vstack(ht_parts)

    g_states = np.vstack(gs)
    f_states = np.vstack(fs)
    b_states = np.concatenate(bs)
    if term:
        g_states = np.vstack([g_states] + [t[0] for t in term])
        f_states = np.vstack([f_states] + [t[1] for t in term])
        b_states = np.concatenate([b_states] + [t[2] for t in term])

    G_i = g_states[:, own]
    F_i = np.hstack([f_states] + [-g_states[:, cols[j]] for j in others])

    sub = plant.subsystems[i]
    n_ui = sub.n_u
    sel_rows, sel_b = [], []
    for l in range(N):
        sel = np.zeros((n_ui, n_i))
        sel[:, l * n_ui:(l + 1) * n_ui] = np.eye(n_ui)
        sel_rows.extend([sel, -sel])
        sel_b.extend([sub.u_ub, -sub.u_lb])
    G_all = np.vstack([G_i] + sel_rows)
    b_all = np.concatenate([b_states] + sel_b)
    F_all = np.vstack([F_i, np.zeros((2 * N * n_ui, F_i.shape[1]))])

    blocks = tuple((j, len(cols[j])) for j in others)
    th_lb = np.concatenate([plant.x_lb]
                           + [np.tile(plant.subsystems[j].u_lb, N) for j in others])
    th_ub = np.concatenate([plant.x_ub]
                           + [np.tile(plant.subsystems[j].u_ub, N) for j in others])
    layout = ThetaLayout(n_x, blocks, th_lb, th_ub)
    return MpQpData(H_i, H_t, np.zeros(n_i), G_all, b_all, F_all, layout)


def online_solution(q: MpQpData, theta, *, tol: ToleranceConfig = DEFAULT_TOL,
                    check_definite: bool = False) -> QpResult:
    """Solve the QP instance at a fixed parameter vector."""
    theta = np.asarray(theta, dtype=np.float64).ravel()
    f = q.H_t.T @ theta + q.c
    return qp_active_set(q.H, f, q.G, q.b, theta_shift=q.F @ theta, tol=tol,
                         check_definite=check_definite)


@dataclass(frozen=True)
class CriticalRegion:
    """One affine piece of the explicit solution; ``region`` is None when a
    law is valid on the whole parameter space (no constraints)."""

    id: int
    region: Polytope | None
    K: np.ndarray
    k: np.ndarray
    active_set: tuple[int, ...]


@dataclass
class MpSolution:
    regions: list[CriticalRegion]
    layout: ThetaLayout | None = None
    provenance: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    _cache: dict | None = field(default=None, repr=False, compare=False)

    @property
    def n_regions(self) -> int:
        return len(self.regions)

    def _point_location_cache(self):
        if self._cache is None:
            rows, rhs, offsets, ids = [], [], [0], []
            free_ids = []
            for reg in self.regions:
                if reg.region is None:
                    free_ids.append(reg.id)
                    continue
                rows.append(reg.region.Phi)
                rhs.append(reg.region.phi)
                offsets.append(offsets[-1] + reg.region.n_rows)
                ids.append(reg.id)
            self._cache = {
                "Phi": np.vstack(rows) if rows else None,
                "phi": np.concatenate(rhs) if rhs else None,
                "starts": np.asarray(offsets[:-1], dtype=np.int64),
                "ids": np.asarray(ids, dtype=np.int64),
                "free_ids": free_ids,
            }
        return self._cache

    def locate(self, theta, tol: float = 1e-9) -> int | None:
        """Lowest region id containing theta, or None."""
        theta = np.asarray(theta, dtype=np.float64).ravel()
        cache = self._point_location_cache()
        best = min(cache["free_ids"]) if cache["free_ids"] else None
        if cache["Phi"] is not None:
            viol = cache["Phi"] @ theta - cache["phi"]
            seg_max = np.maximum.reduceat(viol, cache["starts"])
            hits = cache["ids"][seg_max <= tol]
            if hits.size:
                cand = int(hits.min())
                best = cand if best is None else min(best, cand)
        return best


def evaluate_explicit(solution: MpSolution, theta, tol: float = 1e-9):
    """Explicit control law lookup: returns (U, region_id)."""
    theta = np.asarray(theta, dtype=np.float64).ravel()
    rid = solution.locate(theta, tol)
    if rid is None:
        raise errors.OutsideFeasibleSet("theta lies in no critical region")
    reg = solution.regions[rid]
    return reg.K @ theta + reg.k, rid


def enumerate_regions(q: MpQpData, *, tol: ToleranceConfig = DEFAULT_TOL,
                      min_radius: float = MIN_FULLDIM_RADIUS,
                      provenance: dict | None = None) -> MpSolution:
    """Enumerate the explicit piecewise-affine solution of an MpQpData.

    Depth-first search over active sets of cardinality <= n_dec.  A branch
    is cut when the candidate's rows go linearly dependent or when
    constraining them to equality is infeasible over the parameter box.
    Candidate regions keep only full-dimensional pieces (Chebyshev radius
    >= ``min_radius``), normalized and redundancy-pruned.
    """
    n, nth, nc = q.n_dec, q.n_theta, q.n_c
    G, b, F, H = q.G, q.b, q.F, q.H
    if np.linalg.eigvalsh(H).min() <= 1e-10:
        raise errors.NotPositiveDefinite("H fails the eigenvalue screen")
    top = np.hstack([-q.H_t.T, -q.c[:, None]])

    # static parts of the pruning LP over z = [U; theta], pre-normalized so
    # each node only stacks rows and runs the phase-1 simplex
    base_rows = np.hstack([G, -F]) if nc else np.zeros((0, n + nth))
    base_norms = np.linalg.norm(base_rows, axis=1) if nc else np.zeros(0)
    keep = base_norms > 1e-12
    bn_rows = base_rows[keep] / base_norms[keep, None] if nc else base_rows
    bn_rhs = b[keep] / base_norms[keep] if nc else b
    eye_th = np.eye(nth)
    box_rows = np.vstack([
        np.hstack([np.zeros((nth, n)), eye_th]),
        np.hstack([np.zeros((nth, n)), -eye_th]),
    ])
    box_rhs = np.concatenate([q.layout.theta_ub, -q.layout.theta_lb])
    static_rows = np.vstack([bn_rows, box_rows])
    static_rhs = np.concatenate([bn_rhs, box_rhs])
    zero_obj = np.zeros(n + nth)

    diagnostics = {"nodes": 0, "degenerate_kkt": 0, "thin_regions": 0}
    records: list[tuple[tuple[int, ...], Polytope | None, np.ndarray, np.ndarray]] = []

    def feasible(aset):
        from ._kernels import OPTIMAL as _OPT, STALLED as _STL, simplex_solve

        if aset:
            idx = list(aset)
            norms = np.maximum(base_norms[idx], 1e-12)
            eq = base_rows[idx] / norms[:, None]
            eq_rhs = b[idx] / norms
            A = np.vstack([static_rows, eq, -eq])
            rhs = np.concatenate([static_rhs, eq_rhs, -eq_rhs])
        else:
            A, rhs = static_rows, static_rhs
        status, _, _ = simplex_solve(zero_obj, A, rhs)
        if status == _STL:
            raise errors.NumericalFailure("pruning LP stalled")
        return status == _OPT

    def law(aset):
        a = len(aset)
        S = np.zeros((n + a, n + a))
        S[:n, :n] = H
        if a:
            Ga = G[list(aset)]
            S[:n, n:] = Ga.T
            S[n:, :n] = Ga
            rhs = np.vstack([top, np.hstack([F[list(aset)], b[list(aset)][:, None]])])
        else:
            rhs = top
        X = solve_linear(S, rhs)
        return X[:n, :nth], X[:n, nth], X[n:]

    # region classification outcomes
    FULL, EVERYTHING, EMPTY, THIN = "full", "everything", "empty", "thin"

    def build_region(aset, K, kvec, lam):
        inactive = [i for i in range(nc) if i not in aset]
        parts_c, parts_r = [], []
        if inactive:
            Gi = G[inactive]
            parts_c.append(Gi @ K - F[inactive])
            parts_r.append(b[inactive] - Gi @ kvec)
        if len(aset):
            parts_c.append(-lam[:, :nth])
            parts_r.append(lam[:, nth])
        if not parts_c:
            return EVERYTHING, None
        coef = np.vstack(parts_c)
        rhs = np.concatenate(parts_r)
        norms = np.linalg.norm(coef, axis=1)
        tiny = norms < 1e-10
        if np.any(tiny):
            if np.any(rhs[tiny] < -1e-9):
                return EMPTY, None
            coef, rhs = coef[~tiny], rhs[~tiny]
        if coef.shape[0] == 0:
            return EVERYTHING, None
        poly = normalize(Polytope(coef, rhs))
        _, radius = chebyshev(poly, tol=tol)
        if radius < min_radius:
            if radius >= -tol.feas_tol:
                diagnostics["thin_regions"] += 1
                return THIN, None
            return EMPTY, None
        return FULL, remove_redundant(poly, tol=tol)

    def visit(aset, basis):
        diagnostics["nodes"] += 1
        if not feasible(aset):
            return
        try:
            K, kvec, lam = law(aset)
        except errors.SingularMatrix:
            diagnostics["degenerate_kkt"] += 1
            K = None
        if K is not None:
            kind, region = build_region(aset, K, kvec, lam)
            if kind == FULL:
                records.append((aset, region, K, kvec))
            elif kind == EVERYTHING:
                records.append((aset, None, K, kvec))
        if len(aset) == n:
            return
        start = aset[-1] + 1 if aset else 0
        for g_idx in range(start, nc):
            row = G[g_idx]
            r = row.copy()
            for _ in range(2):
                for bvec in basis:
                    r = r - (bvec @ r) * bvec
            nr = np.linalg.norm(r)
            if nr <= tol.rank_tol * max(1.0, np.linalg.norm(row)):
                continue
            visit(aset + (g_idx,), basis + [r / nr])

    visit((), [])

    records.sort(key=lambda rec: rec[0])
    regions = [CriticalRegion(idx, reg, K, kvec, aset)
               for idx, (aset, reg, K, kvec) in enumerate(records)]
    return MpSolution(regions, q.layout, provenance or {}, diagnostics)


def to_json_dict(solution: MpSolution) -> dict:
    regions = []
    for reg in solution.regions:
        regions.append({
            "id": reg.id,
            "Phi": reg.region.Phi.tolist() if reg.region is not None else [],
            "phi": reg.region.phi.tolist() if reg.region is not None else [],
            "K": reg.K.tolist(),
            "k": reg.k.tolist(),
            "active_set": list(reg.active_set),
        })
    theta_dim = solution.layout.n_theta if solution.layout is not None else (
        len(solution.regions[0].K[0]) if solution.regions else 0)
    dec_dim = len(solution.regions[0].K) if solution.regions else 0
    return {"theta_dim": theta_dim, "dec_dim": dec_dim, "regions": regions}


def from_json_dict(doc: dict, layout: ThetaLayout | None = None,
                   provenance: dict | None = None) -> MpSolution:
    regions = []
    for rdoc in doc["regions"]:
        Phi = np.asarray(rdoc["Phi"], dtype=np.float64)
        phi = np.asarray(rdoc["phi"], dtype=np.float64)
        region = None if Phi.size == 0 else Polytope(Phi, phi)
        regions.append(CriticalRegion(
            rdoc["id"], region,
            np.asarray(rdoc["K"], dtype=np.float64),
            np.asarray(rdoc["k"], dtype=np.float64),
            tuple(rdoc["active_set"])))
    regions.sort(key=lambda r: r.id)
    return MpSolution(regions, layout, provenance or {})


def dumps(solution: MpSolution) -> str:
    return json.dumps(to_json_dict(solution), indent=2) + "\n"


def loads(text: str, layout: ThetaLayout | None = None) -> MpSolution:
    return from_json_dict(json.loads(text), layout)


def save(solution: MpSolution, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(solution))


def load(path, layout: ThetaLayout | None = None) -> MpSolution:
    with open(path, "r", encoding="utf-8") as fh:
        return loads(fh.read(), layout)


def sample_feasible_parameters(q: MpQpData, rng, count: int, *,
                               tol: ToleranceConfig = DEFAULT_TOL,
                               max_tries: int = 200) -> np.ndarray:
    """Uniform draws from the parameter box, kept only when the QP instance
    is feasible there."""
    out = np.empty((count, q.n_theta))
    got = 0
    for _ in range(max_tries * count):
        theta = rng.uniform(q.layout.theta_lb, q.layout.theta_ub)
        if lp_feasible_point(q.G, q.b + q.F @ theta, tol=tol) is not None:
            out[got] = theta
            got += 1
            if got == count:
                return out
    raise errors.GenerationExhausted(
        f"only {got}/{count} feasible parameter draws")
