"""Equivalence checks and brute-force ground truth for tiny networks.

``verify_by_sampling`` compares two networks on random points, box vertices
and the midpoint. It can refute equivalence but not prove it.

``enumerate_regions`` walks the activation patterns of a small network
depth-first, one unit at a time, keeping only patterns whose region has
nonempty interior in the domain. Region feasibility is decided by a
Chebyshev-style LP (largest margin ``t`` from every sign hyperplane) solved
with scipy's HiGHS, so this oracle shares no code with the package's own
simplex and branch-and-bound. A pattern is kept when its margin exceeds
``FEAS_TOL``. The closures of the kept regions cover the domain, so
extremes over them are extremes over the domain.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from leocompress.errors import DimensionError, EnumerationCapError, SolverError
from leocompress.net import BoxDomain, RectifierNetwork, evaluate
from leocompress.stability import Classification

FEAS_TOL = 1e-7
ZERO_ROW = 1e-12


@dataclass(frozen=True)
class SamplingResult:
    max_abs_diff: float
    argmax_point: np.ndarray
    n_points: int

    def to_dict(self) -> dict:
        return {
            "max_abs_diff": self.max_abs_diff,
            "argmax_point": self.argmax_point.tolist(),
            "n_points": self.n_points,
        }


def sample_points(domain: BoxDomain, n_samples: int, seed: int = 0) -> np.ndarray:
    """Uniform samples, then all box vertices when the input has at most 10 dims, then the midpoint."""
    rng = np.random.default_rng(seed)
    parts = [domain.sample(rng, n_samples)]
    if domain.dim <= 10:
        parts.append(domain.vertices())
    parts.append(domain.midpoint[None, :])
    return np.vstack(parts)


def verify_by_sampling(
    net1: RectifierNetwork, net2: RectifierNetwork, domain: BoxDomain, n_samples: int = 10_000, seed: int = 0
) -> SamplingResult:
    if net1.input_dim != net2.input_dim or net1.input_dim != domain.dim:
        raise DimensionError(f"input dims differ: {net1.input_dim}, {net2.input_dim}, domain {domain.dim}")
    if net1.output_dim != net2.output_dim:
        raise DimensionError(f"output dims differ: {net1.output_dim} vs {net2.output_dim}")
    X = sample_points(domain, n_samples, seed)
    diff = np.abs(evaluate(net1, X) - evaluate(net2, X)).max(axis=1)
    k = int(np.argmax(diff))
    return SamplingResult(float(diff[k]), X[k].copy(), len(X))


# -- activation-region enumeration -------------------------------------------


@dataclass
class Region:
    """One full-dimensional linear region.

    On the region, hidden layer ``l`` has pre-activations
    ``unit_maps[l][0] @ x + unit_maps[l][1]`` and the network computes
    ``affine[0] @ x + affine[1]``. ``A @ x + c >= 0`` are the sign
    constraints that define it inside the box.
    """

    pattern: tuple[tuple[bool, ...], ...]
    affine: tuple[np.ndarray, np.ndarray]
    unit_maps: list[tuple[np.ndarray, np.ndarray]]
    A: np.ndarray
    c: np.ndarray
    witness: np.ndarray
    margin: float
    feasible: bool = True

    @property
    def bits(self) -> tuple[bool, ...]:
        return tuple(b for layer in self.pattern for b in layer)


@dataclass
class _Prefix:
    """Region of the patterns of layers before ``layer``, with that layer's pre-activation map."""

    layer: int
    A: np.ndarray
    c: np.ndarray
    G: np.ndarray
    g: np.ndarray
    witness: np.ndarray


@dataclass
class RegionCatalog:
    net: RectifierNetwork
    domain: BoxDomain
    regions: list[Region]
    prefixes: list[list[_Prefix]]
    lp_count: int = 0
    _extremes: dict = field(default_factory=dict, repr=False)

    def __len__(self) -> int:
        return len(self.regions)

    def patterns(self) -> list[tuple[bool, ...]]:
        return [r.bits for r in self.regions]

    def locate(self, x: np.ndarray) -> Region | None:
        """Region whose closure contains ``x`` (first match)."""
        for r in self.regions:
            if r.A.shape[0] == 0 or np.all(r.A @ x + r.c >= -1e-9):
                return r
        return None


def _box_max(a: np.ndarray, c: float, lo: np.ndarray, hi: np.ndarray) -> float:
    return float(c + np.sum(np.maximum(a * lo, a * hi)))


def _margin_lp(A: np.ndarray, c: np.ndarray, domain: BoxDomain) -> tuple[float, np.ndarray | None]:
    """Largest ``t`` with ``A_r x + c_r >= t |A_r|`` for all rows, ``x`` in the box."""
    n = domain.dim
    norms = np.linalg.norm(A, axis=1)
    obj = np.zeros(n + 1)
    obj[-1] = -1.0
    A_ub = np.hstack([-A, norms[:, None]])
    bounds = [(lo, hi) for lo, hi in zip(domain.lower, domain.upper)] + [(None, 1.0)]
    res = linprog(obj, A_ub=A_ub, b_ub=c, bounds=bounds, method="highs")
    if res.status == 2:
        return -np.inf, None
    if res.status != 0:
        raise SolverError(f"region LP failed: {res.message}")
    return float(res.x[-1]), res.x[:n]


def _extreme_lp(a: np.ndarray, c0: float, A: np.ndarray, c: np.ndarray, domain: BoxDomain, maximize: bool) -> float:
    if A.shape[0] == 0:
        v = _box_max(a if maximize else -a, c0 if maximize else -c0, domain.lower, domain.upper)
        return v if maximize else -v
    sgn = -1.0 if maximize else 1.0
    res = linprog(sgn * a, A_ub=-A, b_ub=c, bounds=list(zip(domain.lower, domain.upper)), method="highs")
    if res.status != 0:
        raise SolverError(f"region extreme LP failed: {res.message}")
    return float(a @ res.x + c0)


class _Enumerator:
    def __init__(self, net: RectifierNetwork, domain: BoxDomain, record_prefixes: bool = True):
        self.net = net
        self.domain = domain
        self.record_prefixes = record_prefixes
        self.regions: list[Region] = []
        self.prefixes: list[list[_Prefix]] = [[] for _ in range(len(net.layers) + 1)]
        self.lp_count = 0

    def run(self, A: np.ndarray, c: np.ndarray, witness: np.ndarray, margin: float) -> None:
        n = self.net.input_dim
        self._layer(0, np.eye(n), np.zeros(n), A, c, witness, margin, (), ())

    def _layer(self, l, P, p, A, c, w, t, pattern, maps) -> None:
        if l == len(self.net.layers):
            out = self.net.output_layer
            affine = (out.weights @ P, out.weights @ p + out.bias)
            self.regions.append(Region(pattern, affine, list(maps), A, c, w, t))
            return
        L = self.net.layers[l]
        G = L.weights @ P
        g = L.weights @ p + L.bias
        if self.record_prefixes:
            self.prefixes[l].append(_Prefix(l, A, c, G, g, w))
        self._unit(l, 0, G, g, A, c, w, t, pattern, maps + ((G, g),), ())

    def _unit(self, l, i, G, g, A, c, w, t, pattern, maps, bits) -> None:
        if i == G.shape[0]:
            D = np.array(bits, dtype=np.float64)
            self._layer(l + 1, D[:, None] * G, D * g, A, c, w, t, pattern + (bits,), maps)
            return
        a, c0 = G[i], float(g[i])
        norm = float(np.linalg.norm(a))
        if norm <= ZERO_ROW:
            # constant pre-activation: exactly one pattern describes it
            self._unit(l, i + 1, G, g, A, c, w, t, pattern, maps, bits + (c0 > 0,))
            return
        lo, hi = self.domain.lower, self.domain.upper
        for active in (True, False):
            s = 1.0 if active else -1.0
            if _box_max(s * a, s * c0, lo, hi) < FEAS_TOL * norm:
                continue
            A2 = np.vstack([A, s * a])
            c2 = np.append(c, s * c0)
            at_w = s * (a @ w + c0) / norm
            if at_w > FEAS_TOL:
                w2, t2 = w, min(t, at_w)
            else:
                self.lp_count += 1
                t2, w2 = _margin_lp(A2, c2, self.domain)
                if t2 <= FEAS_TOL:
                    continue
            self._unit(l, i + 1, G, g, A2, c2, w2, t2, pattern, maps, bits + (active,))


def _check_cap(net: RectifierNetwork, cap: int) -> None:
    total = sum(net.widths)
    if total > cap:
        raise EnumerationCapError(f"{total} hidden units exceed the enumeration cap of {cap}; use sampling instead")


def enumerate_regions(net: RectifierNetwork, domain: BoxDomain, cap: int = 16) -> RegionCatalog:
    if net.input_dim != domain.dim:
        raise DimensionError(f"network takes {net.input_dim} inputs, domain has {domain.dim}")
    _check_cap(net, cap)
    n = net.input_dim
    en = _Enumerator(net, domain)
    en.run(np.zeros((0, n)), np.zeros(0), domain.midpoint, 1.0)
    return RegionCatalog(net, domain, en.regions, en.prefixes, en.lp_count)


def oracle_extreme_preactivation(catalog: RegionCatalog, unit: tuple[int, int], sense: str = "max") -> float:
    """Max (``sense="max"``) or min of ``g`` of hidden unit ``(layer, index)`` over the domain."""
    if sense not in ("max", "min"):
        raise ValueError("sense must be 'max' or 'min'")
    key = (unit, sense)
    if key in catalog._extremes:
        return catalog._extremes[key]
    l, i = unit
    if not 0 <= l < len(catalog.net.layers) or not 0 <= i < catalog.net.layers[l].out_dim:
        raise IndexError(f"no hidden unit {unit}")
    maximize = sense == "max"
    sgn = 1.0 if maximize else -1.0
    lo, hi = catalog.domain.lower, catalog.domain.upper
    # best-first by value at the witness; box bounds skip hopeless regions
    scored = sorted(catalog.prefixes[l], key=lambda pr: -sgn * float(pr.G[i] @ pr.witness + pr.g[i]))
    best = -np.inf
    for pr in scored:
        a, c0 = sgn * pr.G[i], sgn * float(pr.g[i])
        best = max(best, float(a @ pr.witness + c0))
        if _box_max(a, c0, lo, hi) <= best:
            continue
        catalog.lp_count += 1
        best = max(best, sgn * _extreme_lp(pr.G[i], float(pr.g[i]), pr.A, pr.c, catalog.domain, maximize))
    value = sgn * best
    catalog._extremes[key] = value
    return value


def oracle_stability(catalog: RegionCatalog, unit: tuple[int, int], eps_stab: float = 1e-9) -> Classification:
    """Classification from exact extremes, using the same rules as the analyzer."""
    l, i = unit
    L = catalog.net.layers[l]
    if not L.weights[i].any():
        return Classification.CONSTANT_POSITIVE if L.bias[i] > 0 else Classification.STABLY_INACTIVE
    if oracle_extreme_preactivation(catalog, unit, "max") <= -eps_stab:
        return Classification.STABLY_INACTIVE
    if oracle_extreme_preactivation(catalog, unit, "min") >= eps_stab:
        return Classification.STABLY_ACTIVE
    return Classification.UNSTABLE


def compare_region_maps(net1: RectifierNetwork, net2: RectifierNetwork, domain: BoxDomain, cap: int = 16) -> float:
    """Max coefficient difference between the affine maps of two networks over their common refinement.

    Every region of ``net1`` is re-enumerated with ``net2``'s units, so each
    joint region carries one affine map from each network. A result of 0
    (up to rounding) proves the two agree on the whole domain.
    """
    for net in (net1, net2):
        if net.input_dim != domain.dim:
            raise DimensionError("network and domain dims differ")
    if net1.output_dim != net2.output_dim:
        raise DimensionError("output dims differ")
    _check_cap(net1, cap)
    _check_cap(net2, cap)
    outer = enumerate_regions(net1, domain, cap)
    worst = 0.0
    for r in outer.regions:
        en = _Enumerator(net2, domain, record_prefixes=False)
        en.run(r.A, r.c, r.witness, r.margin)
        M1, m1 = r.affine
        for r2 in en.regions:
            M2, m2 = r2.affine
            worst = max(worst, float(np.max(np.abs(M1 - M2), initial=0.0)), float(np.max(np.abs(m1 - m2))))
    return worst
