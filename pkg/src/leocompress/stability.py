"""Per-unit stability classification, layer by layer.

Each layer is handled in three stages: the zero-weight-row check, interval
classification against bounds tightened by earlier layers, and finally the
MILP (prove inactive, then prove active). The bounds recorded for a layer
become the big-M constants of every later layer's models.
"""

from __future__ import annotations

import enum
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from decimal import ROUND_HALF_EVEN, Decimal
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from leocompress.bounds import (
    IntervalClass,
    ProofLevel,
    UnitBounds,
    activation_box,
    affine_interval,
    classify_by_interval,
)
from leocompress.errors import DimensionError
from leocompress.milp.bnb import Budget, Mode, SolveOutcome, SolveStatus, solve_stability
from leocompress.milp.model import Sense, build_stability_model
from leocompress.net import BoxDomain, RectifierNetwork, fingerprint

log = logging.getLogger(__name__)


class Classification(str, enum.Enum):
    STABLY_INACTIVE = "StablyInactive"
    STABLY_ACTIVE = "StablyActive"
    CONSTANT_POSITIVE = "ConstantPositive"
    UNSTABLE = "Unstable"
    UNKNOWN = "Unknown"

    @property
    def is_stable(self) -> bool:
        return self in (Classification.STABLY_INACTIVE, Classification.STABLY_ACTIVE, Classification.CONSTANT_POSITIVE)


@dataclass(frozen=True)
class StabilityConfig:
    eps_stab: float = 1e-9
    node_limit: int = 100_000
    time_limit: float = 10.0
    jobs: int = 1
    # solve unstable units to optimality for exact big-Ms
    tighten: bool = False
    dump_lp: str | None = None

    @property
    def budget(self) -> Budget:
        return Budget(self.node_limit, self.time_limit)


@dataclass
class UnitStability:
    classification: Classification
    bounds: UnitBounds
    witness_pos: np.ndarray | None = None
    witness_neg: np.ndarray | None = None

    @property
    def proof_level(self) -> ProofLevel:
        return self.bounds.proof_level

    def to_dict(self) -> dict:
        d = {"classification": self.classification.value, **self.bounds.to_dict()}
        d["witness_pos"] = None if self.witness_pos is None else self.witness_pos.tolist()
        d["witness_neg"] = None if self.witness_neg is None else self.witness_neg.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "UnitStability":
        b = UnitBounds(d["g_max"], d["g_min"], d["H"], d["H_bar"], ProofLevel(d["proof_level"]))
        wp = None if d.get("witness_pos") is None else np.array(d["witness_pos"], dtype=np.float64)
        wn = None if d.get("witness_neg") is None else np.array(d["witness_neg"], dtype=np.float64)
        return cls(Classification(d["classification"]), b, wp, wn)


@dataclass
class StabilityReport:
    entries: list[list[UnitStability]]
    fingerprint: str
    eps_stab: float
    # wall-clock seconds; printed, never serialized (reports stay byte-identical)
    runtime: float = field(default=0.0, compare=False)

    def __getitem__(self, key: tuple[int, int]) -> UnitStability:
        l, i = key
        return self.entries[l][i]

    def bounds(self) -> list[list[UnitBounds]]:
        return [[e.bounds for e in layer] for layer in self.entries]

    def layer_counts(self, l: int) -> dict[str, int]:
        counts = {c.value: 0 for c in Classification}
        for e in self.entries[l]:
            counts[e.classification.value] += 1
        return counts

    @property
    def total_units(self) -> int:
        return sum(len(layer) for layer in self.entries)

    @property
    def stable_units(self) -> int:
        return sum(e.classification.is_stable for layer in self.entries for e in layer)

    @property
    def unknown_units(self) -> int:
        return sum(e.classification is Classification.UNKNOWN for layer in self.entries for e in layer)

    def stability_percent(self) -> float:
        total = self.total_units
        return 100.0 * self.stable_units / total if total else 0.0

    def to_dict(self) -> dict:
        layers = []
        for l, layer in enumerate(self.entries):
            counts = self.layer_counts(l)
            stable = sum(e.classification.is_stable for e in layer)
            layers.append(
                {
                    "layer": l + 1,
                    "counts": counts,
                    "stability_pct": round_half_even(100.0 * stable / len(layer)),
                    "units": [e.to_dict() for e in layer],
                }
            )
        return {
            "fingerprint": self.fingerprint,
            "eps_stab": self.eps_stab,
            "total_units": self.total_units,
            "stable_units": self.stable_units,
            "network_stability_pct": round_half_even(self.stability_percent()),
            "layers": layers,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StabilityReport":
        entries = [[UnitStability.from_dict(u) for u in layer["units"]] for layer in d["layers"]]
        return cls(entries, d["fingerprint"], d["eps_stab"])


def round_half_even(value: float, places: int = 1) -> float:
    q = Decimal(1).scaleb(-places)
    return float(Decimal(repr(float(value))).quantize(q, rounding=ROUND_HALF_EVEN))


def format_1dp(value: float) -> str:
    q = Decimal("0.1")
    return str(Decimal(repr(float(value))).quantize(q, rounding=ROUND_HALF_EVEN))


def _milp_unit(
    net: RectifierNetwork,
    domain: BoxDomain,
    prior: list[list[UnitBounds]],
    target: tuple[int, int],
    interval: UnitBounds,
    config: StabilityConfig,
) -> UnitStability:
    eps = config.eps_stab
    budget = config.budget
    m_max = build_stability_model(net, domain, prior, target, Sense.MAXIMIZE, eps)
    m_min = build_stability_model(net, domain, prior, target, Sense.MINIMIZE, eps)
    if config.dump_lp:
        tag = f"L{target[0] + 1}_U{target[1] + 1}"
        Path(config.dump_lp, f"{tag}_max.lp").write_text(m_max.to_lp_text())
        Path(config.dump_lp, f"{tag}_min.lp").write_text(m_min.to_lp_text())

    up = solve_stability(m_max, Mode.PROVE_INACTIVE, budget, eps)
    g_max = min(interval.g_max, up.global_bound)
    if up.status is SolveStatus.PROVED_NEGATIVE_MAX:
        b = UnitBounds.from_range(interval.g_min, g_max, ProofLevel.MILP_BOUND)
        return UnitStability(Classification.STABLY_INACTIVE, b)

    down = solve_stability(m_min, Mode.PROVE_ACTIVE, budget, eps)
    g_min = max(interval.g_min, down.global_bound)
    wpos = _witness(up, positive=True)
    wneg = _witness(down, positive=False)
    if down.status is SolveStatus.PROVED_POSITIVE_MIN:
        b = UnitBounds.from_range(g_min, g_max, ProofLevel.MILP_BOUND)
        return UnitStability(Classification.STABLY_ACTIVE, b, wpos)

    level = ProofLevel.MILP_BOUND
    if config.tighten:
        up_t = solve_stability(m_max, Mode.TIGHTEN_BOUND, budget, eps)
        down_t = solve_stability(m_min, Mode.TIGHTEN_BOUND, budget, eps)
        g_max = min(g_max, up_t.global_bound)
        g_min = max(g_min, down_t.global_bound)
        if up_t.status is SolveStatus.OPTIMAL and down_t.status is SolveStatus.OPTIMAL:
            level = ProofLevel.MILP_EXACT
        wpos = wpos if wpos is not None else _witness(up_t, positive=True)
        wneg = wneg if wneg is not None else _witness(down_t, positive=False)
    elif up.status is SolveStatus.OPTIMAL and down.status is SolveStatus.OPTIMAL:
        level = ProofLevel.MILP_EXACT
    b = UnitBounds.from_range(g_min, g_max, level)

    if SolveStatus.RESOURCE_LIMIT in (up.status, down.status) and (wpos is None or wneg is None):
        return UnitStability(Classification.UNKNOWN, b, wpos, wneg)
    # no proof either way: unstable, or within eps_stab of zero (treated as unstable)
    return UnitStability(Classification.UNSTABLE, b, wpos, wneg)


def _witness(out: SolveOutcome, positive: bool) -> np.ndarray | None:
    if out.incumbent_point is None or out.incumbent_value is None:
        return None
    if (out.incumbent_value > 0) if positive else (out.incumbent_value < 0):
        return out.incumbent_point
    return None


def _milp_unit_star(args) -> UnitStability:
    return _milp_unit(*args)


def analyze(net: RectifierNetwork, domain: BoxDomain, config: StabilityConfig = StabilityConfig()) -> StabilityReport:
    """Classify every hidden unit of ``net`` over ``domain``.

    Units the solver cannot decide within budget come back ``Unknown``; the
    compressor treats them like unstable units.
    """
    if domain.dim != net.input_dim:
        raise DimensionError(f"domain has dimension {domain.dim}, network expects {net.input_dim}")
    start = time.perf_counter()
    eps = config.eps_stab
    if config.dump_lp:
        Path(config.dump_lp).mkdir(parents=True, exist_ok=True)
    prior: list[list[UnitBounds]] = []
    entries: list[list[UnitStability]] = []
    lo, hi = domain.lower, domain.upper
    pool = ProcessPoolExecutor(config.jobs) if config.jobs > 1 else None
    try:
        for l, layer in enumerate(net.layers):
            W, b = layer.weights, layer.bias
            g_lo, g_hi = affine_interval(W, b, lo, hi)
            layer_entries: list[UnitStability | None] = [None] * layer.out_dim
            todo = []
            for i in range(layer.out_dim):
                ib = UnitBounds.from_range(g_lo[i], g_hi[i])
                if not W[i].any():
                    const = UnitBounds.from_range(b[i], b[i])
                    cls = Classification.CONSTANT_POSITIVE if b[i] > 0 else Classification.STABLY_INACTIVE
                    layer_entries[i] = UnitStability(cls, const)
                    continue
                verdict = classify_by_interval(ib, eps)
                if verdict is IntervalClass.PROVED_INACTIVE:
                    layer_entries[i] = UnitStability(Classification.STABLY_INACTIVE, ib)
                elif verdict is IntervalClass.PROVED_ACTIVE:
                    layer_entries[i] = UnitStability(Classification.STABLY_ACTIVE, ib)
                else:
                    todo.append((net, domain, prior, (l, i), ib, config))
            if pool is not None and len(todo) > 1:
                results = list(pool.map(_milp_unit_star, todo))
            else:
                results = [_milp_unit_star(t) for t in todo]
            for args, res in zip(todo, results):
                layer_entries[args[3][1]] = res
            done = [e for e in layer_entries if e is not None]
            assert len(done) == layer.out_dim
            entries.append(done)
            prior = prior + [[e.bounds for e in done]]
            lo, hi = activation_box(prior[-1])
            log.info("layer %d: %s", l + 1, {k: v for k, v in _counts(done).items() if v})
    finally:
        if pool is not None:
            pool.shutdown()
    report = StabilityReport(entries, fingerprint(net, domain), eps)
    report.runtime = time.perf_counter() - start
    return report


def _counts(layer: Iterable[UnitStability]) -> dict[str, int]:
    counts = {c.value: 0 for c in Classification}
    for e in layer:
        counts[e.classification.value] += 1
    return counts


@dataclass
class SummaryRow:
    layer: str
    stably_active: float
    stably_inactive: float
    stability_pct: float


def stability_summary(reports: StabilityReport | Sequence[StabilityReport]) -> list[SummaryRow]:
    """Per-layer stable counts and stability %, averaged over ``reports``.

    The last row aggregates the whole network. All values are rounded half
    to even at one decimal.
    """
    if isinstance(reports, StabilityReport):
        reports = [reports]
    if not reports:
        return []
    depth = len(reports[0].entries)
    if any(len(r.entries) != depth for r in reports):
        raise ValueError("reports describe networks of different depth")
    rows = []
    for l in range(depth):
        act = [sum(e.classification is Classification.STABLY_ACTIVE for e in r.entries[l]) for r in reports]
        ina = [sum(e.classification is Classification.STABLY_INACTIVE for e in r.entries[l]) for r in reports]
        pct = [100.0 * sum(e.classification.is_stable for e in r.entries[l]) / len(r.entries[l]) for r in reports]
        rows.append(SummaryRow(str(l + 1), _mean(act), _mean(ina), _mean(pct)))
    rows.append(
        SummaryRow(
            "network",
            _mean([sum(e.classification is Classification.STABLY_ACTIVE for lay in r.entries for e in lay) for r in reports]),
            _mean([sum(e.classification is Classification.STABLY_INACTIVE for lay in r.entries for e in lay) for r in reports]),
            _mean([r.stability_percent() for r in reports]),
        )
    )
    return rows


def _mean(values: Sequence[float]) -> float:
    return round_half_even(float(np.mean(values)))


def render_stability_table(rows: list[SummaryRow], runtime: float | None = None) -> str:
    lines = [f"{'Layer':>8}  {'Stably active':>13}  {'Stably inactive':>15}  {'Stability (%)':>13}"]
    for r in rows:
        lines.append(
            f"{r.layer:>8}  {format_1dp(r.stably_active):>13}  {format_1dp(r.stably_inactive):>15}  {format_1dp(r.stability_pct):>13}"
        )
    if runtime is not None:
        lines.append(f"Runtime (s): {runtime:.3f}")
    return "\n".join(lines)
