"""Best-bound branch-and-bound over the ReLU binaries of a stability model.

Internally everything is oriented as maximization (``sgn * objective``). The
global bound is the max over open-node LP bounds, the LP bounds of closed
nodes and the incumbent, so it stays a valid dual bound at any stopping
point. Incumbents are certified by forward-evaluating the network at the
LP's input coordinates, so every incumbent value is attained by a real
input in the domain.
"""

from __future__ import annotations

import enum
import heapq
import time
from dataclasses import dataclass

import numpy as np

from leocompress.errors import SolverError
from leocompress.milp.model import MilpModel, Sense
from leocompress.milp.simplex import LPResult, LPStatus, solve_bounded_lp

FEAS_TOL = 1e-7
INT_TOL = 1e-6
GAP_TOL = 1e-9


class Mode(str, enum.Enum):
    PROVE_INACTIVE = "ProveInactive"
    PROVE_ACTIVE = "ProveActive"
    TIGHTEN_BOUND = "TightenBound"


class SolveStatus(str, enum.Enum):
    PROVED_NEGATIVE_MAX = "ProvedNegativeMax"
    FOUND_POSITIVE_VALUE = "FoundPositiveValue"
    PROVED_POSITIVE_MIN = "ProvedPositiveMin"
    FOUND_NEGATIVE_VALUE = "FoundNegativeValue"
    OPTIMAL = "Optimal"
    BOUND_ONLY = "BoundOnly"
    INFEASIBLE = "Infeasible"
    RESOURCE_LIMIT = "ResourceLimit"


@dataclass(frozen=True)
class Budget:
    node_limit: int = 100_000
    time_limit: float = 10.0


@dataclass
class SolveOutcome:
    """Result of one stability solve.

    ``global_bound`` is a valid upper bound on the optimum when maximizing
    (lower bound when minimizing); ``incumbent_value`` is attained at
    ``incumbent_point``.
    """

    status: SolveStatus
    incumbent_value: float | None
    incumbent_point: np.ndarray | None
    global_bound: float
    nodes: int
    time: float


def solve_lp(model: MilpModel, lb: np.ndarray | None = None, ub: np.ndarray | None = None) -> LPResult:
    """LP relaxation (binaries in ``[0, 1]``) of ``model``; value includes the constant."""
    res = solve_bounded_lp(
        model.c,
        model.A_eq,
        model.b_eq,
        model.A_ub,
        model.b_ub,
        model.lb if lb is None else lb,
        model.ub if ub is None else ub,
        maximize=model.sense is Sense.MAXIMIZE,
        feas_tol=FEAS_TOL,
    )
    if res.status is LPStatus.UNBOUNDED:
        raise SolverError("stability model relaxation is unbounded; all variables should be boxed")
    if res.status is LPStatus.OPTIMAL:
        res.value = res.value + model.c0
    return res


def solve_stability(
    model: MilpModel,
    mode: Mode = Mode.TIGHTEN_BOUND,
    budget: Budget = Budget(),
    eps_stab: float = 1e-9,
) -> SolveOutcome:
    if mode is Mode.PROVE_INACTIVE and model.sense is not Sense.MAXIMIZE:
        raise ValueError("ProveInactive needs a maximization model")
    if mode is Mode.PROVE_ACTIVE and model.sense is not Sense.MINIMIZE:
        raise ValueError("ProveActive needs a minimization model")

    start = time.perf_counter()
    sgn = 1.0 if model.sense is Sense.MAXIMIZE else -1.0
    proving = mode is not Mode.TIGHTEN_BOUND
    lo_in = model.domain.lower
    hi_in = model.domain.upper

    incumbent = -np.inf
    inc_point: np.ndarray | None = None
    closed = -np.inf
    heap: list = []
    seq = 0
    nodes = 0

    def outcome(status: SolveStatus, bound: float) -> SolveOutcome:
        inc = None if inc_point is None else sgn * incumbent
        return SolveOutcome(status, inc, inc_point, sgn * bound, nodes, time.perf_counter() - start)

    def process(res: LPResult, lb: np.ndarray, ub: np.ndarray) -> None:
        nonlocal incumbent, inc_point, closed, seq
        if res.status is LPStatus.INFEASIBLE:
            return
        o = sgn * res.value
        x_in = np.clip(res.x[model.input_vars], lo_in, hi_in)
        v = sgn * model.objective_at(x_in)
        if v > incumbent:
            incumbent, inc_point = v, x_in
        z = res.x[model.binaries]
        frac = np.abs(z - np.round(z))
        if frac.size == 0 or frac.max() <= INT_TOL or o <= incumbent + GAP_TOL:
            closed = max(closed, o)
            return
        heapq.heappush(heap, (-o, seq, lb, ub, z))
        seq += 1

    def global_bound() -> float:
        top = -heap[0][0] if heap else -np.inf
        return max(top, closed, incumbent)

    exhausted = SolveStatus.RESOURCE_LIMIT if proving else SolveStatus.BOUND_ONLY
    if budget.time_limit <= 0:
        return outcome(exhausted, sgn * model.box_bound())

    root = solve_lp(model)
    if root.status is LPStatus.INFEASIBLE:
        return outcome(SolveStatus.INFEASIBLE, -np.inf)
    process(root, model.lb, model.ub)

    while True:
        bound = global_bound()
        if proving:
            if bound <= -eps_stab:
                status = SolveStatus.PROVED_NEGATIVE_MAX if sgn > 0 else SolveStatus.PROVED_POSITIVE_MIN
                return outcome(status, bound)
            if incumbent > -eps_stab:
                status = SolveStatus.FOUND_POSITIVE_VALUE if sgn > 0 else SolveStatus.FOUND_NEGATIVE_VALUE
                return outcome(status, bound)
        if not heap or bound - incumbent <= GAP_TOL * (1.0 + abs(incumbent)):
            return outcome(SolveStatus.OPTIMAL, bound)
        if nodes + 2 > budget.node_limit or time.perf_counter() - start >= budget.time_limit:
            return outcome(exhausted, bound)

        _, _, lb, ub, z = heapq.heappop(heap)
        # most fractional; argmin keeps the lowest (layer, unit) on ties
        k = int(np.argmin(np.abs(z - 0.5)))
        j = model.binaries[k]
        for val in (0.0, 1.0):
            clb, cub = lb.copy(), ub.copy()
            clb[j] = cub[j] = val
            nodes += 1
            process(solve_lp(model, clb, cub), clb, cub)
