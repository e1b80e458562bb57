"""Exact simulation of quantum non-malleable codes and secret sharing."""

from __future__ import annotations

__version__ = "0.1.0"

__all__ = [
    "algebra",
    "cli",
    "extractors",
    "gf2k",
    "nmc",
    "nmss",
    "pauli_clifford",
    "qmatrix",
    "secret_sharing",
    "tamper_harness",
]
