"""Network and domain representation, exact forward evaluation, JSON I/O.

Layer indices are 0-based in the Python API. JSON files and printed tables
number hidden layers from 1.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from leocompress.errors import DimensionError, FormatError, UnsupportedActivationError


def _frozen(a: Any, ndim: int) -> np.ndarray:
    arr = np.array(a, dtype=np.float64, copy=True)
    if arr.ndim != ndim:
        raise DimensionError(f"expected a {ndim}-d array, got shape {arr.shape}")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class Layer:
    """Affine map ``g = weights @ h + bias``; row i holds unit i's incoming weights."""

    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        w = _frozen(self.weights, 2)
        b = _frozen(self.bias, 1)
        if w.shape[0] != b.shape[0]:
            raise DimensionError(f"weights have {w.shape[0]} rows but bias has length {b.shape[0]}")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise DimensionError("layer parameters must be finite")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True, eq=False)
class RectifierNetwork:
    """ReLU hidden layers followed by an affine output layer.

    A network with no hidden layers is allowed; it is what collapsing
    produces.
    """

    layers: tuple[Layer, ...]
    output_layer: Layer
    input_dim: int

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if self.input_dim < 1:
            raise DimensionError("input_dim must be positive")
        prev = self.input_dim
        for k, layer in enumerate(self.layers):
            if layer.out_dim < 1:
                raise DimensionError(f"hidden layer {k + 1} has no units")
            if layer.in_dim != prev:
                raise DimensionError(f"hidden layer {k + 1} expects {layer.in_dim} inputs, got {prev}")
            prev = layer.out_dim
        if self.output_layer.in_dim != prev:
            raise DimensionError(f"output layer expects {self.output_layer.in_dim} inputs, got {prev}")

    @classmethod
    def from_arrays(cls, params: Sequence[tuple[Any, Any]], input_dim: int | None = None) -> "RectifierNetwork":
        """Build from ``[(W1, b1), ..., (WL, bL), (W_out, b_out)]``."""
        layers = [Layer(w, b) for w, b in params]
        if input_dim is None:
            input_dim = layers[0].in_dim
        return cls(tuple(layers[:-1]), layers[-1], input_dim)

    @property
    def widths(self) -> list[int]:
        return [layer.out_dim for layer in self.layers]

    @property
    def output_dim(self) -> int:
        return self.output_layer.out_dim

    @property
    def num_hidden(self) -> int:
        """Total number of hidden units."""
        return sum(self.widths)

    @property
    def depth(self) -> int:
        """Number of hidden layers."""
        return len(self.layers)

    def all_layers(self) -> tuple[Layer, ...]:
        return self.layers + (self.output_layer,)

    def to_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "layers": [
                {"weights": layer.weights.tolist(), "bias": layer.bias.tolist(), "activation": "relu"}
                for layer in self.layers
            ],
            "output_layer": {"weights": self.output_layer.weights.tolist(), "bias": self.output_layer.bias.tolist()},
            "output_activation": "linear",
        }

    def fingerprint(self) -> str:
        return hashlib.sha256(dumps_json(self.to_dict()).encode()).hexdigest()


@dataclass(frozen=True, eq=False)
class BoxDomain:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = _frozen(self.lower, 1)
        hi = _frozen(self.upper, 1)
        if lo.shape != hi.shape:
            raise DimensionError("lower and upper must have the same length")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise DimensionError("domain bounds must be finite")
        if np.any(lo > hi):
            raise DimensionError("domain has lower > upper")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def unit_box(cls, dim: int) -> "BoxDomain":
        return cls(np.zeros(dim), np.ones(dim))

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    @property
    def midpoint(self) -> np.ndarray:
        return (self.lower + self.upper) / 2.0

    def vertices(self) -> np.ndarray:
        """All 2**dim corners, row-major with the first coordinate varying slowest."""
        bits = (np.arange(2**self.dim)[:, None] >> np.arange(self.dim - 1, -1, -1)) & 1
        return np.where(bits == 1, self.upper, self.lower)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.lower + rng.random((n, self.dim)) * (self.upper - self.lower)

    def contains(self, x: np.ndarray, tol: float = 0.0) -> bool:
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))

    def to_dict(self) -> dict:
        return {"lower": self.lower.tolist(), "upper": self.upper.tolist()}


def forward(net: RectifierNetwork, x) -> tuple[np.ndarray, list[np.ndarray], list[np.ndarray]]:
    """Evaluate one input; returns ``(y, preacts, acts)`` for the hidden layers."""
    h = np.asarray(x, dtype=np.float64)
    if h.shape != (net.input_dim,):
        raise DimensionError(f"input has shape {h.shape}, network expects ({net.input_dim},)")
    preacts, acts = [], []
    for layer in net.layers:
        g = layer.weights @ h + layer.bias
        h = np.maximum(g, 0.0)
        preacts.append(g)
        acts.append(h)
    y = net.output_layer.weights @ h + net.output_layer.bias
    return y, preacts, acts


def evaluate(net: RectifierNetwork, X) -> np.ndarray:
    """Batched forward pass over the rows of ``X``; returns outputs only."""
    H = np.asarray(X, dtype=np.float64)
    if H.ndim != 2 or H.shape[1] != net.input_dim:
        raise DimensionError(f"inputs have shape {H.shape}, network expects (n, {net.input_dim})")
    for layer in net.layers:
        H = np.maximum(H @ layer.weights.T + layer.bias, 0.0)
    return H @ net.output_layer.weights.T + net.output_layer.bias


def preactivations(net: RectifierNetwork, X) -> list[np.ndarray]:
    """Batched hidden pre-activations, one ``(n, n_l)`` array per layer."""
    H = np.asarray(X, dtype=np.float64)
    out = []
    for layer in net.layers:
        G = H @ layer.weights.T + layer.bias
        out.append(G)
        H = np.maximum(G, 0.0)
    return out


# -- serialization ---------------------------------------------------------


def _fmt_float(v: float) -> str:
    if not math.isfinite(v):
        raise FormatError(f"non-finite value {v!r}")
    s = format(v, ".17g")
    if "e" not in s and "." not in s:
        s += ".0"
    return s


def _emit(obj: Any, out: list[str], indent: int, level: int) -> None:
    pad = " " * (indent * (level + 1))
    end_pad = " " * (indent * level)
    if isinstance(obj, bool) or obj is None:
        out.append(json.dumps(obj))
    elif isinstance(obj, (float, np.floating)):
        out.append(_fmt_float(float(obj)))
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        for k, (key, val) in enumerate(obj.items()):
            out.append(f"{pad}{json.dumps(str(key))}: ")
            _emit(val, out, indent, level + 1)
            out.append(",\n" if k < len(obj) - 1 else "\n")
        out.append(end_pad + "}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if all(isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool) for v in seq):
            # number vectors stay on one line
            parts: list[str] = []
            for v in seq:
                _emit(v, parts, indent, level)
            out.append("[" + ", ".join(parts) + "]")
            return
        if not seq:
            out.append("[]")
            return
        out.append("[\n")
        for k, val in enumerate(seq):
            out.append(pad)
            _emit(val, out, indent, level + 1)
            out.append(",\n" if k < len(seq) - 1 else "\n")
        out.append(end_pad + "]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps_json(obj: Any, indent: int = 1) -> str:
    """Deterministic JSON with every float written to 17 significant digits."""
    out: list[str] = []
    _emit(obj, out, indent, 0)
    return "".join(out) + "\n"


def _number_array(value: Any, ndim: int, field: str) -> np.ndarray:
    try:
        arr = np.array(value, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise FormatError(f"not a numeric array ({exc})", field) from None
    if arr.ndim != ndim:
        if ndim == 2 and arr.ndim == 1 and arr.size == 0:
            return arr.reshape(0, 0)
        raise FormatError(f"expected a {ndim}-d array, got shape {arr.shape}", field)
    if not np.all(np.isfinite(arr)):
        raise FormatError("contains a non-finite value", field)
    return arr


def _parse_layer(d: Any, field: str, hidden: bool) -> Layer:
    if not isinstance(d, dict):
        raise FormatError("expected an object", field)
    for key in ("weights", "bias"):
        if key not in d:
            raise FormatError("missing key", f"{field}.{key}")
    if hidden:
        act = d.get("activation", "relu")
        if act != "relu":
            raise UnsupportedActivationError(f"unsupported activation {act!r}; only 'relu' hidden layers", f"{field}.activation")
    w = _number_array(d["weights"], 2, f"{field}.weights")
    b = _number_array(d["bias"], 1, f"{field}.bias")
    if w.shape[0] != b.shape[0]:
        raise FormatError(f"length {b.shape[0]} does not match {w.shape[0]} weight rows", f"{field}.bias")
    return Layer(w, b)


def network_from_dict(d: Any) -> RectifierNetwork:
    if not isinstance(d, dict):
        raise FormatError("network file must hold a JSON object")
    for key in ("input_dim", "layers", "output_layer"):
        if key not in d:
            raise FormatError("missing key", key)
    n0 = d["input_dim"]
    if not isinstance(n0, int) or isinstance(n0, bool) or n0 < 1:
        raise FormatError("must be a positive integer", "input_dim")
    out_act = d.get("output_activation", "linear")
    if out_act != "linear":
        raise UnsupportedActivationError(f"unsupported output activation {out_act!r}", "output_activation")
    if not isinstance(d["layers"], list):
        raise FormatError("expected a list", "layers")
    layers = [_parse_layer(ld, f"layers[{k}]", True) for k, ld in enumerate(d["layers"])]
    out = _parse_layer(d["output_layer"], "output_layer", False)
    prev = n0
    for k, layer in enumerate(layers):
        if layer.out_dim < 1:
            raise FormatError("hidden layer has no units", f"layers[{k}].weights")
        if layer.in_dim != prev:
            raise FormatError(f"has {layer.in_dim} columns, expected {prev}", f"layers[{k}].weights")
        prev = layer.out_dim
    if out.in_dim != prev:
        raise FormatError(f"has {out.in_dim} columns, expected {prev}", "output_layer.weights")
    return RectifierNetwork(tuple(layers), out, n0)


def domain_from_dict(d: Any) -> BoxDomain:
    if not isinstance(d, dict):
        raise FormatError("domain file must hold a JSON object")
    for key in ("lower", "upper"):
        if key not in d:
            raise FormatError("missing key", key)
    lo = _number_array(d["lower"], 1, "lower")
    hi = _number_array(d["upper"], 1, "upper")
    if lo.shape != hi.shape:
        raise FormatError(f"length {hi.shape[0]} differs from lower ({lo.shape[0]})", "upper")
    bad = np.nonzero(lo > hi)[0]
    if bad.size:
        raise FormatError("lower exceeds upper", f"lower[{bad[0]}]")
    return BoxDomain(lo, hi)


def _read_json(path) -> Any:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"malformed JSON in {path}: {exc}") from None


def load_network(path) -> RectifierNetwork:
    return network_from_dict(_read_json(path))


def save_network(net: RectifierNetwork, path) -> None:
    Path(path).write_text(dumps_json(net.to_dict()))


def load_domain(path) -> BoxDomain:
    return domain_from_dict(_read_json(path))


def save_domain(domain: BoxDomain, path) -> None:
    Path(path).write_text(dumps_json(domain.to_dict()))


def fingerprint(net: RectifierNetwork, domain: BoxDomain) -> str:
    """Hash identifying an exact (network, domain) pair."""
    payload = dumps_json({"net": net.to_dict(), "domain": domain.to_dict()})
    return hashlib.sha256(payload.encode()).hexdigest()
