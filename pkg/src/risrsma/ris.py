"""Frequency-selective reflection model: ideal phases gated by service selection.

Each RIS element applies a tunable phase only toward the BS it serves
(selection entry 1); toward every other band it reflects with the fixed
coefficient 1.  The practical reflection vector of BS s is therefore
``theta = exp(j * phi * v)`` elementwise.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, NonBinarySelection, SelectionConflict

__all__ = [
    "practical_reflection",
    "validate_selection",
    "reflection_matrix",
    "ReflectionDesign",
]


def practical_reflection(phi: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Reflection coefficients ``exp(j * phi * v)`` for one BS.

    ``phi`` holds ideal phases in (0, 2pi]; ``v`` is the binary selection
    row.  Elements with v=0 reflect with coefficient exactly 1.
    """
    phi = np.asarray(phi, dtype=float)
    v = np.asarray(v)
    if phi.shape != v.shape or phi.ndim != 1:
        raise DimensionMismatch(f"phase/selection shapes differ: {phi.shape} vs {v.shape}")
    if not np.all(np.isin(v, (0, 1))):
        raise NonBinarySelection("selection entries must be 0 or 1")
    return np.exp(1j * phi * v)


def validate_selection(v_matrix: np.ndarray) -> bool:
    """Check the S x M selection matrix: binary, at most one BS per element."""
    v_matrix = np.asarray(v_matrix)
    if v_matrix.ndim != 2:
        raise DimensionMismatch("selection matrix must be 2-D (S x M)")
    if not np.all(np.isin(v_matrix, (0, 1))):
        raise NonBinarySelection("selection entries must be 0 or 1")
    col_sums = v_matrix.sum(axis=0)
    bad = np.nonzero(col_sums > 1)[0]
    if bad.size:
        raise SelectionConflict(int(bad[0]))
    return True


def reflection_matrix(theta: np.ndarray) -> np.ndarray:
    """Diagonal reflection-coefficient matrix diag(theta)."""
    theta = np.asarray(theta)
    if theta.ndim != 1:
        raise DimensionMismatch("theta must be a vector")
    return np.diag(theta)


@dataclass(frozen=True)
class ReflectionDesign:
    """Ideal phases plus binary service selection for the whole RIS.

    ``phases``: S x M, entries in (0, 2pi].  ``selection``: S x M binary with
    column sums <= 1.  ``theta(s)`` returns the induced practical reflection
    vector of BS s.
    """

    phases: np.ndarray
    selection: np.ndarray

    def __post_init__(self):
        phases = np.asarray(self.phases, dtype=float)
        selection = np.asarray(self.selection, dtype=int)
        if phases.shape != selection.shape or phases.ndim != 2:
            raise DimensionMismatch(
                f"phases {phases.shape} and selection {selection.shape} must both be S x M"
            )
        validate_selection(selection)
        object.__setattr__(self, "phases", phases)
        object.__setattr__(self, "selection", selection)

    @property
    def num_bs(self) -> int:
        return self.phases.shape[0]

    @property
    def num_elements(self) -> int:
        return self.phases.shape[1]

    def theta(self, s: int) -> np.ndarray:
        return practical_reflection(self.phases[s], self.selection[s])

    def to_json(self, path: str | Path | None = None) -> str:
        payload = json.dumps(
            {"phases": self.phases.tolist(), "selection": self.selection.tolist()},
            indent=2,
        )
        if path is not None:
            Path(path).write_text(payload)
        return payload

    @classmethod
    def from_json(cls, source: str | Path) -> "ReflectionDesign":
        text = Path(source).read_text() if Path(str(source)).exists() else str(source)
        data = json.loads(text)
        return cls(phases=np.array(data["phases"]), selection=np.array(data["selection"]))
