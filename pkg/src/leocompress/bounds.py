"""Interval bound propagation for hidden-unit pre-activations."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from leocompress.net import BoxDomain, RectifierNetwork


class ProofLevel(str, enum.Enum):
    INTERVAL = "Interval"
    MILP_BOUND = "MilpBound"
    MILP_EXACT = "MilpExact"


class IntervalClass(str, enum.Enum):
    PROVED_INACTIVE = "ProvedInactive"
    PROVED_ACTIVE = "ProvedActive"
    UNKNOWN = "Unknown"


@dataclass(frozen=True)
class UnitBounds:
    """Valid enclosure ``[g_min, g_max]`` of one unit's pre-activation.

    ``H`` and ``H_bar`` are the big-M constants for the unit output and its
    complement, derived from the enclosure.
    """

    g_max: float
    g_min: float
    H: float
    H_bar: float
    proof_level: ProofLevel = ProofLevel.INTERVAL

    @classmethod
    def from_range(cls, g_min: float, g_max: float, proof_level: ProofLevel = ProofLevel.INTERVAL) -> "UnitBounds":
        g_min, g_max = float(g_min), float(g_max)
        if g_min > g_max:
            # float noise between two valid one-sided bounds
            g_min = g_max = (g_min + g_max) / 2.0
        return cls(g_max, g_min, max(0.0, g_max), max(0.0, -g_min), proof_level)

    def to_dict(self) -> dict:
        return {
            "g_min": self.g_min,
            "g_max": self.g_max,
            "H": self.H,
            "H_bar": self.H_bar,
            "proof_level": self.proof_level.value,
        }


def affine_interval(weights: np.ndarray, bias: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Exact range of ``weights @ h + bias`` over the box ``lo <= h <= hi``."""
    W_pos = np.maximum(weights, 0.0)
    W_neg = np.minimum(weights, 0.0)
    g_lo = W_pos @ lo + W_neg @ hi + bias
    g_hi = W_pos @ hi + W_neg @ lo + bias
    return g_lo, g_hi


def relu_interval(g_lo: np.ndarray, g_hi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return np.maximum(g_lo, 0.0), np.maximum(g_hi, 0.0)


def interval_propagate(net: RectifierNetwork, domain: BoxDomain) -> list[list[UnitBounds]]:
    """Layerwise interval bounds for every hidden unit.

    Layer 1 bounds are exact (an affine function over a box attains its
    extremes at vertices); deeper layers are sound but usually loose.
    """
    lo, hi = domain.lower, domain.upper
    out = []
    for layer in net.layers:
        g_lo, g_hi = affine_interval(layer.weights, layer.bias, lo, hi)
        out.append([UnitBounds.from_range(a, b) for a, b in zip(g_lo, g_hi)])
        lo, hi = relu_interval(g_lo, g_hi)
    return out


def classify_by_interval(bounds: UnitBounds, eps_stab: float = 1e-9) -> IntervalClass:
    if bounds.g_max <= -eps_stab:
        return IntervalClass.PROVED_INACTIVE
    if bounds.g_min >= eps_stab:
        return IntervalClass.PROVED_ACTIVE
    return IntervalClass.UNKNOWN


def activation_box(bounds: list[UnitBounds]) -> tuple[np.ndarray, np.ndarray]:
    """Post-ReLU interval ``[max(0,g_min), max(0,g_max)]`` for one layer."""
    g_lo = np.array([b.g_min for b in bounds])
    g_hi = np.array([b.g_max for b in bounds])
    return relu_interval(g_lo, g_hi)
