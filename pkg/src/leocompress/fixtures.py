"""Random networks with planted stability and a ground-truth record.

Per hidden layer the generator places

* ``inactive`` units with bias ``-hi - margin``, where ``hi`` is the interval
  upper bound of ``w . h`` over the previous layer's interval box, so the
  unit is dead everywhere on the domain;
* ``active`` units with bias ``-lo + margin``; the last ``dependent`` of them
  get weight rows that are random combinations of the other active rows;
* the rest as unstable units whose bias centers the range of ``w . h``
  observed on sample points, so both signs are actually attained.

With ``exact=True`` all weights, biases and sample points are dyadic
rationals of small magnitude, so forward passes are exact in float64.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from leocompress.bounds import affine_interval
from leocompress.errors import FixtureSpecError
from leocompress.net import BoxDomain, Layer, RectifierNetwork, dumps_json, save_domain, save_network
from leocompress.stability import Classification

_DYADIC = 8.0
_SAMPLES = 256
_RETRIES = 200


def _per_layer(value, n: int, name: str) -> tuple[int, ...]:
    if isinstance(value, (int, np.integer)):
        return (int(value),) * n
    vals = tuple(int(v) for v in value)
    if len(vals) != n:
        raise FixtureSpecError(f"{name} needs one count per hidden layer ({n}), got {len(vals)}")
    return vals


@dataclass(frozen=True)
class FixtureSpec:
    widths: tuple[int, ...]
    input_dim: int = 2
    inactive: tuple[int, ...] | int = 0
    active: tuple[int, ...] | int = 0
    dependent: tuple[int, ...] | int = 0
    output_dim: int = 1
    seed: int = 0
    exact: bool = False
    margin: float = 0.125
    lower: float = 0.0
    upper: float = 1.0

    def counts(self) -> tuple[tuple[int, ...], tuple[int, ...], tuple[int, ...]]:
        n = len(self.widths)
        return (
            _per_layer(self.inactive, n, "inactive"),
            _per_layer(self.active, n, "active"),
            _per_layer(self.dependent, n, "dependent"),
        )

    def validate(self) -> None:
        if not self.widths or any(w < 1 for w in self.widths):
            raise FixtureSpecError("every hidden layer needs at least one unit")
        if self.input_dim < 1 or self.output_dim < 1:
            raise FixtureSpecError("input and output dims must be positive")
        if not self.lower < self.upper:
            raise FixtureSpecError("domain needs lower < upper")
        if self.margin <= 0:
            raise FixtureSpecError("margin must be positive")
        inactive, active, dependent = self.counts()
        prev = self.input_dim
        for l, w in enumerate(self.widths):
            if min(inactive[l], active[l], dependent[l]) < 0:
                raise FixtureSpecError(f"layer {l + 1}: counts must be nonnegative")
            if inactive[l] + active[l] > w:
                raise FixtureSpecError(f"layer {l + 1}: {inactive[l]} inactive + {active[l]} active exceed width {w}")
            if dependent[l] > active[l]:
                raise FixtureSpecError(f"layer {l + 1}: dependent count exceeds active count")
            independent = active[l] - dependent[l]
            if dependent[l] and independent < 1:
                raise FixtureSpecError(f"layer {l + 1}: dependent rows need at least one independent active row")
            if independent > prev:
                raise FixtureSpecError(
                    f"layer {l + 1}: {independent} independent active rows exceed the rank budget {prev}"
                )
            prev = w


@dataclass
class Fixture:
    net: RectifierNetwork
    domain: BoxDomain
    truth: dict

    def classes(self) -> list[list[Classification]]:
        return [[Classification(c) for c in layer] for layer in self.truth["classes"]]

    def write(self, out_dir: str | Path) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {"net": out / "net.json", "domain": out / "domain.json", "truth": out / "truth.json"}
        save_network(self.net, paths["net"])
        save_domain(self.domain, paths["domain"])
        paths["truth"].write_text(dumps_json(self.truth))
        return paths


class _Draw:
    def __init__(self, rng: np.random.Generator, exact: bool):
        self.rng = rng
        self.exact = exact

    def matrix(self, shape) -> np.ndarray:
        if self.exact:
            return self.rng.integers(-8, 9, size=shape) / _DYADIC
        return self.rng.normal(size=shape) / np.sqrt(shape[-1])

    def coeffs(self, k: int) -> np.ndarray:
        if self.exact:
            c = self.rng.choice(np.array([-2.0, -1.0, -0.5, 0.5, 1.0, 2.0]), size=k)
        else:
            c = self.rng.uniform(0.5, 1.5, size=k) * self.rng.choice([-1.0, 1.0], size=k)
        return c

    def points(self, domain: BoxDomain, n: int) -> np.ndarray:
        if self.exact:
            steps = self.rng.integers(0, 9, size=(n, domain.dim)) / _DYADIC
            return domain.lower + steps * (domain.upper - domain.lower)
        return domain.sample(self.rng, n)

    def round(self, v):
        return np.round(np.asarray(v) * _DYADIC) / _DYADIC if self.exact else v


def generate_fixture(spec: FixtureSpec) -> Fixture:
    spec.validate()
    inactive, active, dependent = spec.counts()
    rng = np.random.default_rng(spec.seed)
    draw = _Draw(rng, spec.exact)
    margin = float(draw.round(spec.margin)) if spec.exact else spec.margin
    if margin <= 0:
        raise FixtureSpecError("margin rounds to zero in exact mode")
    domain = BoxDomain(np.full(spec.input_dim, float(spec.lower)), np.full(spec.input_dim, float(spec.upper)))
    X = draw.points(domain, _SAMPLES)

    layers: list[Layer] = []
    classes: list[list[str]] = []
    lo_prev, hi_prev = domain.lower.copy(), domain.upper.copy()
    H = X
    prev = spec.input_dim
    for l, width in enumerate(spec.widths):
        n_unstable = width - inactive[l] - active[l]
        indep = active[l] - dependent[l]
        kinds = ["inactive"] * inactive[l] + ["active"] * indep + ["dependent"] * dependent[l] + ["unstable"] * n_unstable
        for _ in range(_RETRIES):
            W, b, ok = _layer_rows(draw, kinds, prev, lo_prev, hi_prev, H, margin)
            if ok:
                break
        else:
            raise FixtureSpecError(f"layer {l + 1}: could not draw unstable units with a nonzero range on the samples")
        perm = rng.permutation(width)
        W, b = W[perm], b[perm]
        labels = [kinds[k] for k in perm]
        layers.append(Layer(W, b))
        classes.append(
            [
                {
                    "inactive": Classification.STABLY_INACTIVE,
                    "active": Classification.STABLY_ACTIVE,
                    "dependent": Classification.STABLY_ACTIVE,
                    "unstable": Classification.UNSTABLE,
                }[k].value
                for k in labels
            ]
        )
        lo_g, hi_g = affine_interval(W, b, lo_prev, hi_prev)
        lo_prev, hi_prev = np.maximum(lo_g, 0.0), np.maximum(hi_g, 0.0)
        H = np.maximum(H @ W.T + b, 0.0)
        prev = width

    out = Layer(draw.matrix((spec.output_dim, prev)), np.zeros(spec.output_dim))
    net = RectifierNetwork(tuple(layers), out, spec.input_dim)
    truth = {
        "seed": spec.seed,
        "widths": list(spec.widths),
        "input_dim": spec.input_dim,
        "exact": spec.exact,
        "classes": classes,
        "planted": [
            {"layer": l + 1, "inactive": inactive[l], "active": active[l], "dependent": dependent[l]}
            for l in range(len(spec.widths))
        ],
        "stable_units": sum(inactive) + sum(active),
        "stability_pct": 100.0 * (sum(inactive) + sum(active)) / sum(spec.widths),
    }
    return Fixture(net, domain, truth)


def _layer_rows(draw: _Draw, kinds: list[str], prev: int, lo_prev, hi_prev, H, margin):
    width = len(kinds)
    W = draw.matrix((width, prev))
    idx_active = [k for k, kind in enumerate(kinds) if kind == "active"]
    for k, kind in enumerate(kinds):
        if kind == "dependent":
            W[k] = draw.coeffs(len(idx_active)) @ W[idx_active]
    if idx_active and np.linalg.matrix_rank(W[idx_active]) < len(idx_active):
        return W, np.zeros(width), False
    b = np.zeros(width)
    lo_g, hi_g = affine_interval(W, b, lo_prev, hi_prev)
    G = H @ W.T
    for k, kind in enumerate(kinds):
        if kind == "inactive":
            b[k] = -hi_g[k] - margin
        elif kind in ("active", "dependent"):
            b[k] = -lo_g[k] + margin
        else:
            gmax, gmin = float(G[:, k].max()), float(G[:, k].min())
            if gmax - gmin < 1e-3:
                return W, b, False
            b[k] = float(draw.round(-(gmax + gmin) / 2.0))
            if not (gmax + b[k] > 0 > gmin + b[k]):
                return W, b, False
    return W, b, True


def fixture_from_stability(
    widths, stable_pct: float, input_dim: int = 3, seed: int = 0, exact: bool = False, dependent: int = 0
) -> Fixture:
    """Fixture with about ``stable_pct`` percent of each layer planted stable, split between dead and active."""
    inactive, active = [], []
    for w in widths:
        n = int(round(w * stable_pct / 100.0))
        a = n // 2
        inactive.append(n - a)
        active.append(a)
    dep = [min(dependent, max(0, a - 1)) for a in active]
    spec = FixtureSpec(tuple(widths), input_dim, tuple(inactive), tuple(active), tuple(dep), seed=seed, exact=exact)
    return generate_fixture(spec)
