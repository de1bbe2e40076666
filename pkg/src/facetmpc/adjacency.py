"""Geometric classification of critical-region pairs sharing a hyperplane.

Two regions are *hyperplane neighbors* when some facet row of one matches a
facet row of the other with opposite orientation.  Among those candidates,
the facet LP

    max_{t,x} t   s.t.  x in R_i,  x in R_k,
                        t * ||Phi_l|| <= phi_l - Phi_l x   for all facets l != j of R_i

distinguishes three outcomes: infeasible (the regions only share the
hyperplane, not a point), t* ~ 0 (they touch at a point), and t* > 0 (they
share a genuine facet).  Facet edges are what the restricted iteration-free
search walks at runtime.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass

import numpy as np

from . import errors
from .numeric import DEFAULT_TOL, LpProblem, LpStatus, ToleranceConfig, lp_solve
from .mpqp import MpSolution
from .polytope import HYPERPLANE_MATCH_TOL, Polytope

# below this optimum the shared set is treated as a single touching point
T_ZERO_TOL = 1e-7

# facet clearances reaching this cap are reported as unbounded (+inf)
_T_CAP = 1e6


class FacetStatus(enum.Enum):
    NO_SHARED_FACET = "no_shared_facet"
    POINT_TOUCH = "point_touch"
    COMMON_FACET = "common_facet"


@dataclass(frozen=True)
class FacetResult:
    status: FacetStatus
    t_star: float | None
    witness: np.ndarray | None


@dataclass(frozen=True)
class AdjacencyGraph:
    """Symmetric region-neighbor map for one controller's solution.

    ``neighbors`` carries an entry for every region id (possibly empty).  A
    graph with *no* entry for a region signals missing adjacency data for
    it, which the iteration-free controllers treat as "no candidates,
    revert to the iterative path".
    """

    controller: int | None
    neighbors: dict[int, tuple[int, ...]]

    @classmethod
    def from_edges(cls, controller, region_ids, edges) -> "AdjacencyGraph":
        nb: dict[int, set[int]] = {int(r): set() for r in region_ids}
        for i, k in edges:
            if i == k:
                continue
            nb[int(i)].add(int(k))
            nb[int(k)].add(int(i))
        return cls(controller, {r: tuple(sorted(s)) for r, s in sorted(nb.items())})

    def edge_set(self) -> set[tuple[int, int]]:
        out = set()
        for r, ns in self.neighbors.items():
            for k in ns:
                out.add((min(r, k), max(r, k)))
        return out


def shared_hyperplane_candidates(solution: MpSolution,
                                 tol: float = HYPERPLANE_MATCH_TOL):
    """All ordered triples (region_i, region_k, facet_j) where facet j of
    region i matches a facet of region k with opposite orientation."""
    rows, meta = [], []
    for reg in solution.regions:
        if reg.region is None:
            continue
        for f in range(reg.region.n_rows):
            rows.append(np.append(reg.region.Phi[f], reg.region.phi[f]))
            meta.append((reg.id, f))
    if not rows:
        return []
    V = np.asarray(rows)
    beta = V[:, -1]
    order = np.argsort(beta, kind="stable")
    beta_sorted = beta[order]
    found = set()
    for qi in range(V.shape[0]):
        target = -beta[qi]
        lo = int(np.searchsorted(beta_sorted, target - tol, side="left"))
        hi = int(np.searchsorted(beta_sorted, target + tol, side="right"))
        if lo >= hi:
            continue
        cand = order[lo:hi]
        close = np.abs(V[cand] + V[qi]).max(axis=1) <= tol
        for p in cand[close]:
            reg_q, facet_q = meta[qi]
            reg_p, _ = meta[p]
            if reg_p != reg_q:
                found.add((reg_q, reg_p, facet_q))
    return sorted(found)


def facet_lp(R_i: Polytope, R_k: Polytope, j: int, *,
             tol: ToleranceConfig = DEFAULT_TOL,
             t_zero_tol: float = T_ZERO_TOL) -> FacetResult:
    """Classify whether facet j of R_i is a common facet with R_k."""
    if not 0 <= j < R_i.n_rows:
        raise errors.DimensionMismatch("facet index out of range")
    if R_i.dim != R_k.dim:
        raise errors.DimensionMismatch("region dimensions disagree")
    d = R_i.dim
    others = [l for l in range(R_i.n_rows) if l != j]
    norms = np.linalg.norm(R_i.Phi[others], axis=1)

    zero_col_i = np.zeros((R_i.n_rows, 1))
    zero_col_k = np.zeros((R_k.n_rows, 1))
    clearance = np.hstack([R_i.Phi[others], norms[:, None]])
    cap_row = np.zeros(d + 1)
    cap_row[d] = 1.0
    A = np.vstack([
        np.hstack([R_i.Phi, zero_col_i]),
        np.hstack([R_k.Phi, zero_col_k]),
        clearance,
        cap_row,
    ])
    rhs = np.concatenate([R_i.phi, R_k.phi, R_i.phi[others], [_T_CAP]])
    obj = np.zeros(d + 1)
    obj[d] = 1.0
    res = lp_solve(LpProblem(obj, A, rhs), tol=tol)
    if res.status is LpStatus.INFEASIBLE:
        return FacetResult(FacetStatus.NO_SHARED_FACET, None, None)
    if res.status is not LpStatus.OPTIMAL:  # pragma: no cover - capped
        raise errors.NumericalFailure(f"facet LP returned {res.status}")
    witness = res.z[:d]
    t_star = float(res.z[d])
    resid = R_i.phi[j] - float(R_i.Phi[j] @ witness)
    if resid > 1e-6 * max(1.0, float(np.linalg.norm(R_i.Phi[j]))):
        raise errors.NumericalFailure(
            "facet LP witness does not lie on the shared hyperplane; "
            "regions are unlikely to share this hyperplane")
    if t_star >= _T_CAP * (1.0 - 1e-9):
        return FacetResult(FacetStatus.COMMON_FACET, math.inf, witness)
    if t_star <= t_zero_tol:
        return FacetResult(FacetStatus.POINT_TOUCH, t_star, witness)
    return FacetResult(FacetStatus.COMMON_FACET, t_star, witness)


def hyperplane_graph(solution: MpSolution, *,
                     tol: float = HYPERPLANE_MATCH_TOL) -> AdjacencyGraph:
    """Neighbor graph connecting every pair that shares a hyperplane (the
    superset the facet LP later prunes)."""
    edges = {(min(i, k), max(i, k))
             for i, k, _ in shared_hyperplane_candidates(solution, tol)}
    ids = [reg.id for reg in solution.regions]
    return AdjacencyGraph.from_edges(_controller_of(solution), ids, edges)


def build_graph(solution: MpSolution, *, tol: ToleranceConfig = DEFAULT_TOL,
                t_zero_tol: float = T_ZERO_TOL) -> AdjacencyGraph:
    """Facet-neighbor graph: LP-verified common facets only."""
    candidates = shared_hyperplane_candidates(solution)
    by_pair: dict[tuple[int, int], list[tuple[int, int]]] = {}
    for i, k, j in candidates:
        key = (min(i, k), max(i, k))
        by_pair.setdefault(key, []).append((i, j))
    regions = {reg.id: reg.region for reg in solution.regions}
    edges = set()
    for key in sorted(by_pair):
        for i, j in sorted(by_pair[key]):
            k = key[0] if i == key[1] else key[1]
            result = facet_lp(regions[i], regions[k], j,
                              tol=tol, t_zero_tol=t_zero_tol)
            if result.status is FacetStatus.COMMON_FACET:
                edges.add(key)
                break
    ids = [reg.id for reg in solution.regions]
    return AdjacencyGraph.from_edges(_controller_of(solution), ids, edges)


def _controller_of(solution: MpSolution):
    return solution.provenance.get("controller")


def to_json_dict(graph: AdjacencyGraph) -> dict:
    return {
        "controller": graph.controller,
        "neighbors": {str(r): list(ns) for r, ns in sorted(graph.neighbors.items())},
    }


def from_json_dict(doc: dict) -> AdjacencyGraph:
    neighbors = {int(r): tuple(ns) for r, ns in doc["neighbors"].items()}
    return AdjacencyGraph(doc["controller"], dict(sorted(neighbors.items())))


def dumps(graph: AdjacencyGraph) -> str:
    return json.dumps(to_json_dict(graph), indent=2) + "\n"


def loads(text: str) -> AdjacencyGraph:
    return from_json_dict(json.loads(text))


def save(graph: AdjacencyGraph, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(graph))


def load(path) -> AdjacencyGraph:
    with open(path, "r", encoding="utf-8") as fh:
        return loads(fh.read())
