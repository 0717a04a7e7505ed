"""SDE problem definitions: coefficient fields, Jacobians, derived quantities.

An Ito SDE  dX = b(X) dt + sum_j sigma^j(X) dW^j  is described by a
:class:`VectorFieldSet`. All coefficient callables are vectorized: they accept
states of shape (n,) or (paths, n) and return the matching shape; Jacobian
callables return (..., n, n) with entry (i, k) = d sigma^{i j} / d x_k.

Derived quantities follow the Stratonovich calculus conventions used by
splitting schemes:

* drift after Ito -> Stratonovich conversion:
  sigma^0 = b - 1/2 sum_j (d sigma^j) sigma^j
* Lie bracket of two Brownian fields:
  [sigma^j, sigma^m] = (d sigma^m) sigma^j - (d sigma^j) sigma^m

Brownian field indices are 1-based throughout the public API (index 0 is
reserved for the Stratonovich drift), matching the usual notation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional

import numpy as np

Field = Callable[[np.ndarray], np.ndarray]
MatrixField = Callable[[np.ndarray], np.ndarray]
FlowMap = Callable[[np.ndarray | float, np.ndarray], np.ndarray]

# Desk scale: keeps catalog problems cheap and rules out accidental misuse.
MAX_DIMENSION = 16


def _as_state(x, n: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (n,):
        raise ValueError(f"state has trailing dimension {x.shape[-1:]}, expected ({n},)")
    return x


def _mat_vec(mat: np.ndarray, vec: np.ndarray) -> np.ndarray:
    return np.einsum("...ik,...k->...i", mat, vec)


@dataclass(frozen=True)
class VectorFieldSet:
    """Drift, Brownian fields, their Jacobians and optional exact flows.

    exact_flows maps a field index (0 = Stratonovich drift, 1..d = Brownian
    fields) to the flow map (t, x0) -> exp(t V) x0 of that field, vectorized
    over both a batch of states and a per-path vector of times.
    """

    n: int
    d: int
    b: Field
    sigma: tuple[Field, ...]
    jac_b: MatrixField
    jac_sigma: tuple[MatrixField, ...]
    exact_flows: Mapping[int, FlowMap] = field(default_factory=dict)

    def __post_init__(self):
        if not (1 <= self.n <= MAX_DIMENSION and 1 <= self.d <= MAX_DIMENSION):
            raise ValueError(f"dimensions must be in [1, {MAX_DIMENSION}]")
        if len(self.sigma) != self.d or len(self.jac_sigma) != self.d:
            raise ValueError("need exactly d Brownian fields and d Jacobians")

    def sigma_j(self, j: int) -> Field:
        """Brownian field j, 1-based."""
        self._check_index(j)
        return self.sigma[j - 1]

    def jac_sigma_j(self, j: int) -> MatrixField:
        self._check_index(j)
        return self.jac_sigma[j - 1]

    def dsigma_sigma(self, j: int, m: int, x: np.ndarray) -> np.ndarray:
        """(d sigma^j) sigma^m at x; j may equal m."""
        x = _as_state(x, self.n)
        return _mat_vec(self.jac_sigma_j(j)(x), self.sigma_j(m)(x))

    def _check_index(self, j: int):
        if not 1 <= j <= self.d:
            raise ValueError(f"Brownian field index {j} out of range 1..{self.d}")


def stratonovich_drift(fields: VectorFieldSet, x: np.ndarray) -> np.ndarray:
    """sigma^0(x) = b(x) - 1/2 sum_j (d sigma^j)(x) sigma^j(x)."""
    x = _as_state(x, fields.n)
    out = np.asarray(fields.b(x), dtype=float).copy()
    for j in range(1, fields.d + 1):
        out -= 0.5 * fields.dsigma_sigma(j, j, x)
    return out


def lie_bracket(fields: VectorFieldSet, j: int, m: int, x: np.ndarray) -> np.ndarray:
    """[sigma^j, sigma^m](x) = (d sigma^m) sigma^j - (d sigma^j) sigma^m, m < j."""
    if not 1 <= m < j <= fields.d:
        raise ValueError(f"need 1 <= m < j <= d, got j={j}, m={m}, d={fields.d}")
    x = _as_state(x, fields.n)
    return fields.dsigma_sigma(m, j, x) - fields.dsigma_sigma(j, m, x)


@dataclass(frozen=True)
class BracketTable:
    """All pairwise Brownian-field brackets, keyed by (j, m) with m < j."""

    entries: Mapping[tuple[int, int], Field]

    def __call__(self, j: int, m: int, x: np.ndarray) -> np.ndarray:
        return self.entries[(j, m)](x)

    @property
    def pairs(self) -> tuple[tuple[int, int], ...]:
        return tuple(sorted(self.entries.keys()))


def build_bracket_table(fields: VectorFieldSet) -> BracketTable:
    def make(j, m):
        return lambda x: lie_bracket(fields, j, m, x)

    entries = {(j, m): make(j, m) for j in range(2, fields.d + 1) for m in range(1, j)}
    return BracketTable(entries=entries)


# exact_solution signature: (problem, bundle, grid) -> states (paths, N+1, n),
# evaluated at the grid times from the bundle's fine increments.
ExactSolution = Callable[["Problem", "object", "object"], np.ndarray]


@dataclass(frozen=True)
class Problem:
    """A catalog SDE problem: coefficients plus everything tests can anchor on."""

    name: str
    fields: VectorFieldSet
    x0: np.ndarray
    T: float
    commutative: bool
    exact_solution: Optional[ExactSolution] = None
    description: str = ""

    def __post_init__(self):
        x0 = np.asarray(self.x0, dtype=float)
        if x0.shape != (self.fields.n,):
            raise ValueError(f"x0 must have shape ({self.fields.n},)")
        if not self.T > 0:
            raise ValueError("horizon T must be > 0")
        object.__setattr__(self, "x0", x0)

    @property
    def n(self) -> int:
        return self.fields.n

    @property
    def d(self) -> int:
        return self.fields.d

    def brackets(self) -> BracketTable:
        return build_bracket_table(self.fields)

    def descriptor(self) -> dict:
        """JSON-ready summary used by the CLI problem listing."""
        return {
            "id": self.name,
            "n": self.n,
            "d": self.d,
            "T": self.T,
            "x0": self.x0.tolist(),
            "commutative_flag": self.commutative,
        }
