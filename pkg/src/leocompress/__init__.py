"""Lossless compression of feed-forward ReLU networks over a box input domain."""

from leocompress.errors import (
    ContractViolation,
    DimensionError,
    EnumerationCapError,
    FixtureSpecError,
    FormatError,
    LeoError,
    OrderingError,
    StaleReportError,
    UnsupportedActivationError,
)
from leocompress.net import BoxDomain, Layer, RectifierNetwork, forward, load_domain, load_network, save_domain, save_network
from leocompress.bounds import ProofLevel, UnitBounds, classify_by_interval, interval_propagate
from leocompress.stability import Classification, StabilityConfig, StabilityReport, analyze, stability_summary
from leocompress.leo import CompressionOptions, CompressionReport, compress
from leocompress.verify import enumerate_regions, oracle_extreme_preactivation, oracle_stability, verify_by_sampling

__version__ = "0.1.0"

__all__ = [
    "BoxDomain",
    "Classification",
    "CompressionOptions",
    "CompressionReport",
    "ContractViolation",
    "DimensionError",
    "EnumerationCapError",
    "FixtureSpecError",
    "FormatError",
    "Layer",
    "LeoError",
    "OrderingError",
    "ProofLevel",
    "RectifierNetwork",
    "StabilityConfig",
    "StabilityReport",
    "StaleReportError",
    "UnitBounds",
    "UnsupportedActivationError",
    "analyze",
    "classify_by_interval",
    "compress",
    "enumerate_regions",
    "forward",
    "interval_propagate",
    "load_domain",
    "load_network",
    "oracle_extreme_preactivation",
    "oracle_stability",
    "save_domain",
    "save_network",
    "stability_summary",
    "verify_by_sampling",
]
