"""Output-preserving transforms: remove, merge, fold and collapse.

``compress`` walks the hidden layers in order. Within a layer it deletes
units whose output is constant on the domain (keeping the layer nonempty),
grows a basis of linearly independent stably active weight rows in index
order and merges every other stably active unit into it. A layer left with
only stably active units is folded into the next one; a layer reduced to a
single constant unit collapses the whole network to its constant output.

Merging unit ``i`` into basis ``S`` with ``w_i = sum_k alpha_k w_k`` uses
``h_i = sum_k alpha_k (h_k - b_k) + b_i``, so each next-layer unit ``j``
gets ``w_jk += alpha_k w_ji`` and ``b_j += w_ji (b_i - sum_k alpha_k b_k)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from leocompress.errors import ContractViolation, StaleReportError
from leocompress.net import BoxDomain, Layer, RectifierNetwork, evaluate, fingerprint
from leocompress.stability import Classification, StabilityReport

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CompressionOptions:
    tau_rank: float = 1e-8
    merge_check_points: int = 32
    merge_check_tol: float = 1e-8
    seed: int = 0


@dataclass
class LayerCompression:
    layer: int
    width: int
    removed_inactive: int = 0
    removed_constant: int = 0
    merged: int = 0
    folded: bool = False
    folded_units: int = 0
    collapsed_units: int = 0

    @property
    def units_removed(self) -> int:
        return self.removed_inactive + self.removed_constant + self.merged + self.folded_units + self.collapsed_units

    def to_dict(self) -> dict:
        return {
            "layer": self.layer,
            "width": self.width,
            "removed_inactive": self.removed_inactive,
            "removed_constant": self.removed_constant,
            "merged": self.merged,
            "folded": self.folded,
            "folded_units": self.folded_units,
            "collapsed_units": self.collapsed_units,
            "units_removed": self.units_removed,
        }


@dataclass
class CompressionReport:
    layers: list[LayerCompression]
    final_widths: list[int] = field(default_factory=list)
    collapsed: bool = False
    upsilon: list[float] | None = None
    operations: int = 0

    @classmethod
    def for_network(cls, net: RectifierNetwork) -> "CompressionReport":
        return cls([LayerCompression(l + 1, w) for l, w in enumerate(net.widths)], list(net.widths))

    @property
    def total_units(self) -> int:
        return sum(lc.width for lc in self.layers)

    @property
    def removed_units(self) -> int:
        return sum(lc.units_removed for lc in self.layers)

    @property
    def folded_layers(self) -> list[int]:
        return [lc.layer for lc in self.layers if lc.folded]

    @property
    def compression_percent(self) -> float:
        return 100.0 * self.removed_units / self.total_units if self.total_units else 0.0

    def to_dict(self) -> dict:
        from leocompress.stability import round_half_even

        return {
            "original_widths": [lc.width for lc in self.layers],
            "final_widths": list(self.final_widths),
            "layers": [lc.to_dict() for lc in self.layers],
            "folded_layers": self.folded_layers,
            "collapsed": self.collapsed,
            "upsilon": self.upsilon,
            "removed_units": self.removed_units,
            "total_units": self.total_units,
            "compression_pct": round_half_even(self.compression_percent),
            "operations": self.operations,
        }


class MergeBasis:
    """Incremental QR of the kept stably active rows of one layer.

    ``members`` are unit identifiers in insertion order; columns of ``Q``
    are an orthonormal basis of their weight rows and ``R`` is upper
    triangular with ``rows.T == Q @ R``.
    """

    def __init__(self, dim: int, tau_rank: float = 1e-8):
        self.dim = dim
        self.tau_rank = tau_rank
        self.members: list[int] = []
        self._Q = np.zeros((dim, 0))
        self._R = np.zeros((0, 0))

    def __len__(self) -> int:
        return len(self.members)

    def _project(self, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        c = self._Q.T @ w
        v = w - self._Q @ c
        # second Gram-Schmidt pass for orthogonality
        c2 = self._Q.T @ v
        return c + c2, v - self._Q @ c2

    def coefficients(self, w: np.ndarray) -> tuple[np.ndarray, float]:
        """Least-squares ``alpha`` with ``w ~ sum alpha_k row_k`` and the relative residual."""
        w = np.asarray(w, dtype=np.float64)
        norm = float(np.linalg.norm(w))
        if not self.members:
            return np.zeros(0), 1.0 if norm > 0 else 0.0
        c, v = self._project(w)
        alpha = solve_triangular(self._R, c, lower=False)
        return alpha, float(np.linalg.norm(v)) / norm if norm > 0 else 0.0

    def is_dependent(self, w: np.ndarray) -> bool:
        return bool(self.members) and self.coefficients(w)[1] <= self.tau_rank

    def add(self, member: int, w: np.ndarray) -> None:
        w = np.asarray(w, dtype=np.float64)
        c, v = self._project(w)
        rho = float(np.linalg.norm(v))
        if rho == 0.0:
            raise ContractViolation("row is in the span of the basis")
        k = len(self.members)
        R = np.zeros((k + 1, k + 1))
        R[:k, :k] = self._R
        R[:k, k] = c
        R[k, k] = rho
        self._R = R
        self._Q = np.hstack([self._Q, (v / rho)[:, None]])
        self.members.append(member)

    def shift_after_delete(self, pos: int) -> None:
        """Renumber positional members after deleting unit ``pos``."""
        self.members = [m - 1 if m > pos else m for m in self.members]


class _Work:
    """Mutable copy of a network; the transforms edit it in place."""

    def __init__(self, net: RectifierNetwork):
        self.input_dim = net.input_dim
        self.W = [np.array(L.weights) for L in net.all_layers()]
        self.b = [np.array(L.bias) for L in net.all_layers()]
        self.ids = [list(range(w)) for w in net.widths]
        self.orig = list(range(len(net.layers)))

    @property
    def depth(self) -> int:
        return len(self.W) - 1

    def net(self) -> RectifierNetwork:
        layers = tuple(Layer(w, b) for w, b in zip(self.W[:-1], self.b[:-1]))
        return RectifierNetwork(layers, Layer(self.W[-1], self.b[-1]), self.input_dim)

    def evaluate(self, X: np.ndarray) -> np.ndarray:
        H = X
        for W, b in zip(self.W[:-1], self.b[:-1]):
            H = np.maximum(H @ W.T + b, 0.0)
        return H @ self.W[-1].T + self.b[-1]

    def remove(self, l: int, pos: int, value: float) -> None:
        """Delete unit ``pos`` of hidden layer ``l`` whose output is the constant ``value``."""
        if self.W[l].shape[0] <= 1:
            raise ContractViolation("cannot remove the last unit of a layer; collapse instead")
        if value != 0.0:
            self.b[l + 1] = self.b[l + 1] + self.W[l + 1][:, pos] * value
        self.W[l] = np.delete(self.W[l], pos, axis=0)
        self.b[l] = np.delete(self.b[l], pos)
        self.W[l + 1] = np.delete(self.W[l + 1], pos, axis=1)
        del self.ids[l][pos]

    def merge(self, l: int, pos: int, basis_pos: list[int], alpha: np.ndarray) -> None:
        if self.W[l].shape[0] <= 1:
            raise ContractViolation("cannot merge the last unit of a layer")
        v = self.W[l + 1][:, pos].copy()
        bias_delta = self.b[l][pos] - float(alpha @ self.b[l][basis_pos])
        W_next = self.W[l + 1].copy()
        for k, a in zip(basis_pos, alpha):
            W_next[:, k] += a * v
        self.W[l + 1] = W_next
        self.b[l + 1] = self.b[l + 1] + v * bias_delta
        self.W[l] = np.delete(self.W[l], pos, axis=0)
        self.b[l] = np.delete(self.b[l], pos)
        self.W[l + 1] = np.delete(self.W[l + 1], pos, axis=1)
        del self.ids[l][pos]

    def fold(self, l: int) -> None:
        W_l, b_l = self.W[l], self.b[l]
        W_n, b_n = self.W[l + 1], self.b[l + 1]
        self.W[l + 1] = W_n @ W_l
        self.b[l + 1] = b_n + W_n @ b_l
        del self.W[l], self.b[l], self.ids[l], self.orig[l]

    def collapse(self, upsilon: np.ndarray) -> None:
        m = self.W[-1].shape[0]
        self.W = [np.zeros((m, self.input_dim))]
        self.b = [np.array(upsilon, dtype=np.float64)]
        self.ids = []
        self.orig = []


# -- single transforms on immutable networks ---------------------------------


def _check_layer(net: RectifierNetwork, l: int, i: int | None = None) -> None:
    if not 0 <= l < len(net.layers):
        raise IndexError(f"no hidden layer {l}")
    if i is not None and not 0 <= i < net.layers[l].out_dim:
        raise IndexError(f"layer {l} has no unit {i}")


def remove_constant_unit(net: RectifierNetwork, l: int, i: int, report: CompressionReport | None = None) -> RectifierNetwork:
    """Delete unit ``i`` of hidden layer ``l``, which must be constant on the domain.

    The caller guarantees the unit is stably inactive or has a zero weight
    row. A zero row with positive bias first pushes its constant output into
    the next layer's bias.
    """
    _check_layer(net, l, i)
    row = net.layers[l].weights[i]
    bias = float(net.layers[l].bias[i])
    value = max(0.0, bias) if not row.any() else 0.0
    work = _Work(net)
    work.remove(l, i, value)
    if report is not None:
        lc = report.layers[l]
        if value > 0:
            lc.removed_constant += 1
        else:
            lc.removed_inactive += 1
        report.operations += 1
        report.final_widths = work.net().widths
    return work.net()


def merge_dependent_unit(
    net: RectifierNetwork, l: int, i: int, basis: MergeBasis, report: CompressionReport | None = None
) -> RectifierNetwork:
    """Merge stably active unit ``i`` into the units of ``basis``.

    ``basis.members`` are unit positions in layer ``l``. If the row of unit
    ``i`` is not in their span (relative residual above ``tau_rank``), the
    network is returned unchanged and ``i`` joins the basis instead.
    Otherwise member positions are renumbered for the deletion.
    """
    _check_layer(net, l, i)
    row = net.layers[l].weights[i]
    if not row.any():
        raise ContractViolation("zero-row units are removed, not merged")
    alpha, resid = basis.coefficients(row)
    if not basis.members or resid > basis.tau_rank:
        basis.add(i, row)
        return net
    if i in basis.members:
        raise ContractViolation("unit is already a basis member")
    work = _Work(net)
    work.merge(l, i, list(basis.members), alpha)
    basis.shift_after_delete(i)
    if report is not None:
        report.layers[l].merged += 1
        report.operations += 1
        report.final_widths = work.net().widths
    return work.net()


def fold_layer(
    net: RectifierNetwork, l: int, S: list[int] | None = None, report: CompressionReport | None = None
) -> RectifierNetwork:
    """Compose stably active hidden layer ``l`` with the layer after it.

    ``S`` lists the stably active units; it must cover the whole layer.
    """
    _check_layer(net, l)
    width = net.layers[l].out_dim
    if S is not None and sorted(S) != list(range(width)):
        raise ContractViolation("fold needs every remaining unit of the layer to be stably active")
    work = _Work(net)
    work.fold(l)
    if report is not None:
        report.layers[l].folded = True
        report.layers[l].folded_units += width
        report.operations += 1
        report.final_widths = work.net().widths
    return work.net()


def collapse_network(net: RectifierNetwork, domain: BoxDomain, report: CompressionReport | None = None) -> RectifierNetwork:
    """Replace ``net`` by its constant output at the domain midpoint.

    Valid only when some layer has been reduced to one unit with constant
    output on the domain.
    """
    upsilon = evaluate(net, domain.midpoint[None, :])[0]
    work = _Work(net)
    widths = net.widths
    work.collapse(upsilon)
    if report is not None:
        for lc, w in zip(report.layers, widths):
            lc.collapsed_units += w
        report.collapsed = True
        report.upsilon = upsilon.tolist()
        report.operations += 1
        report.final_widths = []
    return work.net()


# -- the full pipeline --------------------------------------------------------


def compress(
    net: RectifierNetwork,
    domain: BoxDomain,
    report: StabilityReport,
    options: CompressionOptions = CompressionOptions(),
) -> tuple[RectifierNetwork, CompressionReport]:
    """Return a smaller network equal to ``net`` everywhere on ``domain``.

    Only units the report proves stable are touched; ``Unknown`` units are
    treated exactly like unstable ones.
    """
    if report.fingerprint != fingerprint(net, domain):
        raise StaleReportError("stability report was computed for a different network or domain")
    out = CompressionReport.for_network(net)
    work = _Work(net)
    rng = np.random.default_rng(options.seed)
    probe = domain.sample(rng, options.merge_check_points) if options.merge_check_points else None

    l = 0
    while l < work.depth:
        ol = work.orig[l]
        lc = out.layers[ol]
        basis = MergeBasis(work.W[l].shape[1], options.tau_rank)
        kept_active = 0
        unstable = False
        order = list(work.ids[l])
        for k, uid in enumerate(order):
            pos = work.ids[l].index(uid)
            row = work.W[l][pos]
            cls = report.entries[ol][uid].classification
            zero = not row.any()
            if cls is Classification.STABLY_INACTIVE or zero:
                if k < len(order) - 1 or kept_active or unstable:
                    value = max(0.0, float(work.b[l][pos])) if zero else 0.0
                    work.remove(l, pos, value)
                    if value > 0:
                        lc.removed_constant += 1
                    else:
                        lc.removed_inactive += 1
                    out.operations += 1
            elif cls in (Classification.STABLY_ACTIVE, Classification.CONSTANT_POSITIVE):
                alpha, resid = basis.coefficients(row)
                if not basis.members or resid > options.tau_rank:
                    basis.add(uid, row)
                    kept_active += 1
                elif _try_merge(work, l, pos, basis, alpha, probe, options):
                    lc.merged += 1
                    out.operations += 1
                else:
                    log.warning("merge of layer %d unit %d failed its check; unit kept", ol + 1, uid + 1)
                    kept_active += 1
            else:
                unstable = True
        if not unstable:
            if kept_active:
                lc.folded = True
                lc.folded_units += work.W[l].shape[0]
                work.fold(l)
                out.operations += 1
                continue
            upsilon = evaluate(net, domain.midpoint[None, :])[0]
            for j, ids in enumerate(work.ids):
                out.layers[work.orig[j]].collapsed_units += len(ids)
            work.collapse(upsilon)
            out.collapsed = True
            out.upsilon = upsilon.tolist()
            out.operations += 1
            break
        l += 1

    result = work.net()
    out.final_widths = result.widths
    assert sum(out.final_widths) == out.total_units - out.removed_units
    return result, out


def _try_merge(
    work: _Work, l: int, pos: int, basis: MergeBasis, alpha: np.ndarray, probe: np.ndarray | None, options: CompressionOptions
) -> bool:
    basis_pos = [work.ids[l].index(m) for m in basis.members]
    if probe is None:
        work.merge(l, pos, basis_pos, alpha)
        return True
    before = work.evaluate(probe)
    saved = (list(work.W), list(work.b), [list(ids) for ids in work.ids])
    work.merge(l, pos, basis_pos, alpha)
    after = work.evaluate(probe)
    tol = options.merge_check_tol * (1.0 + float(np.max(np.abs(before), initial=0.0)))
    if float(np.max(np.abs(after - before), initial=0.0)) <= tol:
        return True
    work.W, work.b, work.ids = saved
    return False
