"""Big-M MILP formulation of a network prefix for one target unit.

Every encoded unit ``(l, i)`` below the target layer contributes

    W_i h^{l-1} + b_i = h_i - hbar_i
    h_i <= H_i z_i,   hbar_i <= Hbar_i (1 - z_i)
    h_i, hbar_i >= 0, z_i in {0, 1}

with ``g`` substituted away. Units already proved stable are hard-encoded:
stably inactive ones are dropped (``h = 0``), stably active ones become
``h = W_i h^{l-1} + b_i`` with no binary. The objective is the target
unit's pre-activation.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from leocompress.bounds import UnitBounds
from leocompress.errors import OrderingError
from leocompress.net import BoxDomain, RectifierNetwork


class Sense(str, enum.Enum):
    MAXIMIZE = "Maximize"
    MINIMIZE = "Minimize"


@dataclass
class MilpModel:
    names: list[str]
    lb: np.ndarray
    ub: np.ndarray
    binaries: np.ndarray
    binary_units: list[tuple[int, int]]
    A_eq: np.ndarray
    b_eq: np.ndarray
    A_ub: np.ndarray
    b_ub: np.ndarray
    c: np.ndarray
    c0: float
    sense: Sense
    input_vars: np.ndarray
    target: tuple[int, int]
    net: RectifierNetwork = field(repr=False)
    domain: BoxDomain = field(repr=False)
    eq_names: list[str] = field(default_factory=list)
    ub_names: list[str] = field(default_factory=list)

    @property
    def num_vars(self) -> int:
        return len(self.names)

    @property
    def num_binaries(self) -> int:
        return len(self.binaries)

    def objective_at(self, x: np.ndarray) -> float:
        """Exact target pre-activation at input ``x`` via the network itself."""
        layer, unit = self.target
        h = np.asarray(x, dtype=np.float64)
        for k in range(layer):
            L = self.net.layers[k]
            h = np.maximum(L.weights @ h + L.bias, 0.0)
        L = self.net.layers[layer]
        return float(L.weights[unit] @ h + L.bias[unit])

    def box_bound(self) -> float:
        """Bound on the objective from variable bounds alone (valid, loose)."""
        hi = np.where(self.c > 0, self.ub, self.lb)
        lo = np.where(self.c > 0, self.lb, self.ub)
        if self.sense is Sense.MAXIMIZE:
            return float(self.c @ hi + self.c0)
        return float(self.c @ lo + self.c0)

    def to_lp_text(self) -> str:
        """CPLEX LP format, for cross-checking against an external solver."""

        def expr(row: np.ndarray) -> str:
            terms = [f"{'-' if v < 0 else '+'} {abs(v):.17g} {self.names[j]}" for j, v in enumerate(row) if v != 0]
            if not terms:
                return "0 " + self.names[0]
            s = " ".join(terms)
            return s[2:] if s.startswith("+ ") else s

        layer, unit = self.target
        lines = [
            f"\\ target hidden layer {layer + 1} unit {unit + 1}",
            f"\\ objective constant {self.c0:.17g}",
            self.sense.value,
            f" obj: {expr(self.c)}",
            "Subject To",
        ]
        for k, row in enumerate(self.A_eq):
            lines.append(f" {self.eq_names[k]}: {expr(row)} = {self.b_eq[k]:.17g}")
        for k, row in enumerate(self.A_ub):
            lines.append(f" {self.ub_names[k]}: {expr(row)} <= {self.b_ub[k]:.17g}")
        lines.append("Bounds")
        for j, name in enumerate(self.names):
            lines.append(f" {self.lb[j]:.17g} <= {name} <= {self.ub[j]:.17g}")
        if self.num_binaries:
            lines.append("Binaries")
            lines.append(" " + " ".join(self.names[j] for j in self.binaries))
        lines.append("End")
        return "\n".join(lines) + "\n"


def build_stability_model(
    net: RectifierNetwork,
    domain: BoxDomain,
    bounds: list[list[UnitBounds]],
    target: tuple[int, int],
    sense: Sense = Sense.MAXIMIZE,
    eps_stab: float = 1e-9,
) -> MilpModel:
    layer, unit = target
    if not 0 <= layer < len(net.layers) or not 0 <= unit < net.layers[layer].out_dim:
        raise IndexError(f"no hidden unit {target}")
    if len(bounds) < layer or any(
        len(bounds[k]) != net.layers[k].out_dim or any(b is None for b in bounds[k]) for k in range(layer)
    ):
        raise OrderingError(f"bounds for every unit in layers before {layer + 1} are required")

    names: list[str] = []
    lbs: list[float] = []
    ubs: list[float] = []

    def add_var(name: str, lo: float, hi: float) -> int:
        names.append(name)
        lbs.append(lo)
        ubs.append(hi)
        return len(names) - 1

    eq_rows: list[dict[int, float]] = []
    eq_rhs: list[float] = []
    eq_names: list[str] = []
    ub_rows: list[dict[int, float]] = []
    ub_rhs: list[float] = []
    ub_names: list[str] = []
    binaries: list[int] = []
    binary_units: list[tuple[int, int]] = []

    prev: list[int | None] = [add_var(f"x{j}", domain.lower[j], domain.upper[j]) for j in range(net.input_dim)]
    input_vars = np.array(prev, dtype=int)

    for l in range(layer):
        W, b = net.layers[l].weights, net.layers[l].bias
        cur: list[int | None] = []
        for i in range(W.shape[0]):
            ub_i = bounds[l][i]
            tag = f"{l + 1}_{i + 1}"
            if not W[i].any():
                cur.append(add_var(f"h{tag}", b[i], b[i]) if b[i] > 0 else None)
                continue
            if ub_i.g_max <= -eps_stab:
                cur.append(None)
                continue
            lhs = {v: W[i, k] for k, v in enumerate(prev) if v is not None and W[i, k] != 0}
            if ub_i.g_min >= eps_stab:
                h = add_var(f"h{tag}", max(0.0, ub_i.g_min), ub_i.g_max)
                row = dict(lhs)
                row[h] = row.get(h, 0.0) - 1.0
                eq_rows.append(row)
                eq_rhs.append(-b[i])
                eq_names.append(f"act{tag}")
                cur.append(h)
                continue
            h = add_var(f"h{tag}", 0.0, ub_i.H)
            hbar = add_var(f"hbar{tag}", 0.0, ub_i.H_bar)
            z = add_var(f"z{tag}", 0.0, 1.0)
            binaries.append(z)
            binary_units.append((l, i))
            row = dict(lhs)
            row[h] = -1.0
            row[hbar] = 1.0
            eq_rows.append(row)
            eq_rhs.append(-b[i])
            eq_names.append(f"relu{tag}")
            ub_rows.append({h: 1.0, z: -ub_i.H})
            ub_rhs.append(0.0)
            ub_names.append(f"on{tag}")
            ub_rows.append({hbar: 1.0, z: ub_i.H_bar})
            ub_rhs.append(ub_i.H_bar)
            ub_names.append(f"off{tag}")
            cur.append(h)
        prev = cur

    n = len(names)

    def dense(rows: list[dict[int, float]]) -> np.ndarray:
        M = np.zeros((len(rows), n))
        for r, row in enumerate(rows):
            for j, v in row.items():
                M[r, j] = v
        return M

    W_t = net.layers[layer].weights[unit]
    c = np.zeros(n)
    for k, v in enumerate(prev):
        if v is not None:
            c[v] += W_t[k]

    return MilpModel(
        names=names,
        lb=np.array(lbs, dtype=np.float64),
        ub=np.array(ubs, dtype=np.float64),
        binaries=np.array(binaries, dtype=int),
        binary_units=binary_units,
        A_eq=dense(eq_rows),
        b_eq=np.array(eq_rhs, dtype=np.float64),
        A_ub=dense(ub_rows),
        b_ub=np.array(ub_rhs, dtype=np.float64),
        c=c,
        c0=float(net.layers[layer].bias[unit]),
        sense=sense,
        input_vars=input_vars,
        target=target,
        net=net,
        domain=domain,
        eq_names=eq_names,
        ub_names=ub_names,
    )
