"""Random coupled LTI benchmark plants: generation, validation, stepping.

A plant is M discrete-time subsystems x_i(k+1) = A_i x_i(k) + sum_j B_ij
u_j(k) with box bounds on states and inputs.  The block-diagonal global
system must be Schur stable and controllable from the stacked inputs.
Generation uses NumPy's PCG64 generator (``default_rng(seed)``), so a seed
pins the plant byte-for-byte.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from . import errors
from .numeric import controllability_rank, spectral_radius


@dataclass(frozen=True)
class Subsystem:
    A: np.ndarray            # n_x_i x n_x_i
    B: tuple[np.ndarray, ...]  # one n_x_i x n_u_j block per input owner j
    x_lb: np.ndarray
    x_ub: np.ndarray
    u_lb: np.ndarray         # bounds on this subsystem's own input
    u_ub: np.ndarray

    @property
    def n_x(self) -> int:
        return self.A.shape[0]

    @property
    def n_u(self) -> int:
        return self.u_lb.shape[0]


@dataclass(frozen=True)
class GenerationConfig:
    n_x_per: int = 2
    n_u_per: int = 1
    horizon: int = 3
    sample_period: float = 1.0
    x_lb_range: tuple[float, float] = (-100.0, -10.0)
    x_ub_range: tuple[float, float] = (10.0, 100.0)
    u_lb_range: tuple[float, float] = (-5.0, -1.0)
    u_ub_range: tuple[float, float] = (1.0, 5.0)
    max_rejects: int = 10_000


@dataclass(frozen=True)
class Plant:
    M: int
    subsystems: tuple[Subsystem, ...]
    horizon: int
    sample_period: float = 1.0
    seed: int | None = None

    def __post_init__(self):
        if self.M != len(self.subsystems):
            raise errors.DimensionMismatch("M != number of subsystems")
        if self.horizon < 1:
            raise errors.DimensionMismatch("horizon must be >= 1")
        for sub in self.subsystems:
            if len(sub.B) != self.M:
                raise errors.DimensionMismatch("each subsystem needs M input blocks")
            if not (np.all(sub.x_lb < 0) and np.all(sub.x_ub > 0)
                    and np.all(sub.u_lb < 0) and np.all(sub.u_ub > 0)):
                raise errors.DimensionMismatch("bounds must straddle the origin")
        A, B_list = assemble_global(self, validate=False)
        if spectral_radius(A) >= 1.0:
            raise errors.DimensionMismatch("global A is not Schur stable")
        if controllability_rank(A, np.hstack(B_list)) != A.shape[0]:
            raise errors.DimensionMismatch("plant is not controllable")

    @property
    def n_x(self) -> int:
        return sum(s.n_x for s in self.subsystems)

    @property
    def n_u(self) -> int:
        return sum(s.n_u for s in self.subsystems)

    @property
    def x_lb(self) -> np.ndarray:
        return np.concatenate([s.x_lb for s in self.subsystems])

    @property
    def x_ub(self) -> np.ndarray:
        return np.concatenate([s.x_ub for s in self.subsystems])

    @property
    def u_lb(self) -> np.ndarray:
        return np.concatenate([s.u_lb for s in self.subsystems])

    @property
    def u_ub(self) -> np.ndarray:
        return np.concatenate([s.u_ub for s in self.subsystems])

    def state_slices(self) -> list[slice]:
        out, at = [], 0
        for s in self.subsystems:
            out.append(slice(at, at + s.n_x))
            at += s.n_x
        return out

    def input_slices(self) -> list[slice]:
        out, at = [], 0
        for s in self.subsystems:
            out.append(slice(at, at + s.n_u))
            at += s.n_u
        return out


def assemble_global(plant: Plant, *, validate: bool = True):
    """Block-diagonal A and the stacked per-input-owner B_j matrices."""
    if validate and not isinstance(plant, Plant):
        raise errors.DimensionMismatch("expected a Plant")
    subs = plant.subsystems
    n_x = sum(s.n_x for s in subs)
    A = np.zeros((n_x, n_x))
    at = 0
    for s in subs:
        A[at:at + s.n_x, at:at + s.n_x] = s.A
        at += s.n_x
    B_list = [np.vstack([s.B[j] for s in subs]) for j in range(plant.M)]
    return A, B_list


def step(plant: Plant, x, u) -> np.ndarray:
    """One time step of the coupled dynamics (no clipping)."""
    x = np.asarray(x, dtype=np.float64).ravel()
    u = np.asarray(u, dtype=np.float64).ravel()
    if x.shape[0] != plant.n_x or u.shape[0] != plant.n_u:
        raise errors.DimensionMismatch("state/input dimensions disagree")
    nxt = np.empty_like(x)
    u_sl = plant.input_slices()
    at = 0
    for s in plant.subsystems:
        acc = s.A @ x[at:at + s.n_x]
        for j, Bj in enumerate(s.B):
            acc = acc + Bj @ u[u_sl[j]]
        nxt[at:at + s.n_x] = acc
        at += s.n_x
    return nxt


def generate(M: int, seed: int, config: GenerationConfig = GenerationConfig()) -> Plant:
    """Rejection-sample a stable, controllable coupled plant.

    A and B entries are uniform on [-1, 1]; state and input bounds are drawn
    from the configured intervals.  Deterministic for a fixed seed.
    """
    if M < 2:
        raise errors.DimensionMismatch("generation needs M >= 2")
    rng = np.random.default_rng(seed)
    nx, nu = config.n_x_per, config.n_u_per
    for _ in range(config.max_rejects):
        A_blocks = [rng.uniform(-1.0, 1.0, size=(nx, nx)) for _ in range(M)]
        B_blocks = [[rng.uniform(-1.0, 1.0, size=(nx, nu)) for _ in range(M)]
                    for _ in range(M)]
        if any(spectral_radius(Ai) >= 1.0 for Ai in A_blocks):
            continue
        A_full = np.zeros((M * nx, M * nx))
        for i, Ai in enumerate(A_blocks):
            A_full[i * nx:(i + 1) * nx, i * nx:(i + 1) * nx] = Ai
        B_full = np.hstack([np.vstack([B_blocks[i][j] for i in range(M)])
                            for j in range(M)])
        if controllability_rank(A_full, B_full) != M * nx:
            continue
        subs = []
        for i in range(M):
            x_lb = rng.uniform(*config.x_lb_range, size=nx)
            x_ub = rng.uniform(*config.x_ub_range, size=nx)
            u_lb = rng.uniform(*config.u_lb_range, size=nu)
            u_ub = rng.uniform(*config.u_ub_range, size=nu)
            subs.append(Subsystem(A_blocks[i], tuple(B_blocks[i]),
                                  x_lb, x_ub, u_lb, u_ub))
        return Plant(M, tuple(subs), config.horizon, config.sample_period, seed)
    raise errors.GenerationExhausted(
        f"no stable controllable plant after {config.max_rejects} draws")


def demo_plant_m2() -> Plant:
    """Bundled two-subsystem demo plant (fixed coefficients and bounds)."""
    s1 = Subsystem(
        A=np.array([[0.1645, 0.7399], [0.0815, -0.4704]]),
        B=(np.array([[-0.3639], [-0.7616]]), np.array([[0.8797], [0.2911]])),
        x_lb=np.array([-63.5878, -59.6464]),
        x_ub=np.array([29.6809, 19.5218]),
        u_lb=np.array([-1.2686]),
        u_ub=np.array([3.5116]),
    )
    s2 = Subsystem(
        A=np.array([[-0.0411, 0.0894], [0.2786, 0.2946]]),
        B=(np.array([[0.0878], [0.4421]]), np.array([[0.0450], [0.9874]])),
        x_lb=np.array([-67.0765, -31.2846]),
        x_ub=np.array([19.8728, 15.7232]),
        u_lb=np.array([-1.1090]),
        u_ub=np.array([4.0879]),
    )
    return Plant(2, (s1, s2), horizon=3, sample_period=1.0, seed=None)


def to_json_dict(plant: Plant) -> dict:
    return {
        "M": plant.M,
        "np": plant.horizon,
        "sample_period": plant.sample_period,
        "seed": plant.seed,
        "subsystems": [
            {
                "A": s.A.tolist(),
                "B": [Bj.tolist() for Bj in s.B],
                "x_lb": s.x_lb.tolist(),
                "x_ub": s.x_ub.tolist(),
                "u_lb": s.u_lb.tolist(),
                "u_ub": s.u_ub.tolist(),
            }
            for s in plant.subsystems
        ],
    }


def from_json_dict(doc: dict) -> Plant:
    subs = tuple(
        Subsystem(
            A=np.asarray(s["A"], dtype=np.float64),
            B=tuple(np.asarray(Bj, dtype=np.float64) for Bj in s["B"]),
            x_lb=np.asarray(s["x_lb"], dtype=np.float64),
            x_ub=np.asarray(s["x_ub"], dtype=np.float64),
            u_lb=np.asarray(s["u_lb"], dtype=np.float64),
            u_ub=np.asarray(s["u_ub"], dtype=np.float64),
        )
        for s in doc["subsystems"]
    )
    return Plant(doc["M"], subs, doc["np"], doc["sample_period"], doc["seed"])


def dumps(plant: Plant) -> str:
    return json.dumps(to_json_dict(plant), indent=2) + "\n"


def loads(text: str) -> Plant:
    return from_json_dict(json.loads(text))


def save(plant: Plant, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(plant))


def load(path) -> Plant:
    with open(path, "r", encoding="utf-8") as fh:
        return loads(fh.read())


def plant_hash(plant: Plant) -> str:
    return hashlib.sha256(dumps(plant).encode("utf-8")).hexdigest()[:16]


def draw_initial_state(plant: Plant, seed: int, *, feasibility_check=None,
                       max_rejects: int = 100) -> np.ndarray:
    """Uniform draw within [0.4*x_lb, 0.4*x_ub].

    When ``feasibility_check`` is given (a callable x -> bool), draws are
    rejected until the check passes, so every architecture starts from a
    state with an admissible input plan.
    """
    rng = np.random.default_rng(seed)
    lo, hi = 0.4 * plant.x_lb, 0.4 * plant.x_ub
    for _ in range(max_rejects):
        x0 = rng.uniform(lo, hi)
        if feasibility_check is None or feasibility_check(x0):
            return x0
    raise errors.GenerationExhausted(
        f"no feasible initial state after {max_rejects} draws")
