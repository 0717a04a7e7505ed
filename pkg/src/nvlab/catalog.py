"""Catalog of test problems with known structure.

Every problem ships analytic Jacobians and closed-form flows, so scheme and
limit-law studies are anchored on exact algebra; finite differences only ever
appear as test oracles. The four problems cover the interesting corners:

* ``gbm1d``      - scalar geometric Brownian motion; the splitting scheme
                   solves it exactly, which pins down scheme plumbing.
* ``heisenberg`` - constant + nilpotent fields with constant bracket (0, -1);
                   the simplest genuinely non-commutative problem, solvable in
                   closed form (X1 = W^1, X2 = int W^1 dW^2).
* ``diag-comm``  - commuting diagonal-linear Brownian fields with a coupling
                   drift; the scheme is inexact but converges with order 1.
* ``linear-nc``  - non-commuting linear fields with matrix-exponential flows.
"""

from __future__ import annotations

import numpy as np

from .models import Problem, VectorFieldSet
from .paths import GridSpec, PathBundle, coarsen


def _tcol(t):
    return np.asarray(t, dtype=float)[..., None]


def _const_mat(M):
    M = np.asarray(M, dtype=float)

    def f(x):
        x = np.asarray(x)
        return np.broadcast_to(M, x.shape[:-1] + M.shape)

    return f


def _linear_field(A):
    A = np.asarray(A, dtype=float)

    def f(x):
        return np.einsum("ik,...k->...i", A, np.asarray(x, dtype=float))

    return f


# ---------------------------------------------------------------------------
# gbm1d
# ---------------------------------------------------------------------------

GBM_MU = 0.1
GBM_SIGMA = 0.5


def _gbm_exact(problem: Problem, bundle: PathBundle, grid: GridSpec) -> np.ndarray:
    """x0 * exp((mu - s^2/2) t_k + s W_{t_k}) on the grid."""
    view = coarsen(bundle, grid.N)
    paths = bundle.paths
    W = np.concatenate(
        [np.zeros((paths, 1)), np.cumsum(view.dW[:, :, 0], axis=1)], axis=1
    )
    rate = GBM_MU - 0.5 * GBM_SIGMA**2
    states = problem.x0[0] * np.exp(rate * grid.times()[None, :] + GBM_SIGMA * W)
    return states[:, :, None]


def _make_gbm1d() -> Problem:
    mu, s = GBM_MU, GBM_SIGMA
    rate = mu - 0.5 * s**2
    fields = VectorFieldSet(
        n=1,
        d=1,
        b=lambda x: mu * np.asarray(x, dtype=float),
        sigma=(lambda x: s * np.asarray(x, dtype=float),),
        jac_b=_const_mat([[mu]]),
        jac_sigma=(_const_mat([[s]]),),
        exact_flows={
            0: lambda t, x: np.asarray(x, dtype=float) * np.exp(rate * _tcol(t)),
            1: lambda t, x: np.asarray(x, dtype=float) * np.exp(s * _tcol(t)),
        },
    )
    return Problem(
        name="gbm1d",
        fields=fields,
        x0=np.array([1.0]),
        T=1.0,
        commutative=True,
        exact_solution=_gbm_exact,
        description="scalar geometric Brownian motion, mu=0.1, sigma=0.5",
    )


# ---------------------------------------------------------------------------
# heisenberg
# ---------------------------------------------------------------------------


def _heisenberg_exact(problem: Problem, bundle: PathBundle, grid: GridSpec) -> np.ndarray:
    """X1 = W^1; X2 = int W^1 dW^2 as a left-point Ito sum on the fine grid.

    X1 is accumulated from the coarse increments in step order, which matches
    the scheme's additions bit for bit. X2 needs the fine resolution: the
    within-step iterated integral is exactly what the scheme cannot see.
    """
    view = coarsen(bundle, grid.N)
    paths, N = bundle.paths, grid.N
    block = bundle.n_fine // N
    zeros = np.zeros((paths, 1))
    X1 = np.concatenate([zeros, np.cumsum(view.dW[:, :, 0], axis=1)], axis=1)
    dW1f = bundle.dW[:, :, 0]
    dW2f = bundle.dW[:, :, 1]
    W1_left = np.concatenate([zeros, np.cumsum(dW1f, axis=1)[:, :-1]], axis=1)
    csum = np.cumsum(W1_left * dW2f, axis=1)
    X2 = np.concatenate([zeros, csum[:, block * np.arange(1, N + 1) - 1]], axis=1)
    return np.stack([X1, X2], axis=2)


def _heisenberg_flow1(t, x):
    out = np.array(x, dtype=float, copy=True)
    out[..., 0] += np.asarray(t, dtype=float)
    return out


def _heisenberg_flow2(t, x):
    out = np.array(x, dtype=float, copy=True)
    out[..., 1] += np.asarray(t, dtype=float) * out[..., 0]
    return out


def _make_heisenberg() -> Problem:
    zero2 = np.zeros(2)
    fields = VectorFieldSet(
        n=2,
        d=2,
        b=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        sigma=(
            lambda x: np.broadcast_to([1.0, 0.0], np.asarray(x).shape).copy(),
            lambda x: np.stack(
                [np.zeros_like(np.asarray(x, dtype=float)[..., 0]), np.asarray(x, dtype=float)[..., 0]],
                axis=-1,
            ),
        ),
        jac_b=_const_mat(np.zeros((2, 2))),
        jac_sigma=(_const_mat(np.zeros((2, 2))), _const_mat([[0.0, 0.0], [1.0, 0.0]])),
        exact_flows={
            0: lambda t, x: x,  # drift vanishes identically
            1: _heisenberg_flow1,
            2: _heisenberg_flow2,
        },
    )
    return Problem(
        name="heisenberg",
        fields=fields,
        x0=zero2,
        T=1.0,
        commutative=False,
        exact_solution=_heisenberg_exact,
        description="nilpotent non-commutative pair, bracket [s2,s1] = (0,-1)",
    )


# ---------------------------------------------------------------------------
# diag-comm
# ---------------------------------------------------------------------------

DIAG_A = (0.6, 0.4)
DIAG_THETA = 0.5


def _make_diag_comm() -> Problem:
    a1, a2 = DIAG_A
    theta = DIAG_THETA
    # Stratonovich drift is the symmetric matrix field S0 x.
    S0 = np.array([[-0.5 * a1**2, theta], [theta, -0.5 * a2**2]])
    lam, Q = np.linalg.eigh(S0)
    prop_cache: dict[float, np.ndarray] = {}

    def flow0(t, x):
        t = np.asarray(t, dtype=float)
        if t.ndim == 0:
            # drift flows run at a fixed half-step; cache the 2x2 propagator
            key = float(t)
            M = prop_cache.get(key)
            if M is None:
                if len(prop_cache) > 64:
                    prop_cache.clear()
                M = (Q * np.exp(key * lam)) @ Q.T  # symmetric, so x @ M applies it
                prop_cache[key] = M
            return np.asarray(x, dtype=float) @ M
        z = np.asarray(x, dtype=float) @ Q
        z = z * np.exp(np.multiply.outer(t, lam))
        return z @ Q.T

    def flow1(t, x):
        out = np.array(x, dtype=float, copy=True)
        out[..., 0] *= np.exp(a1 * np.asarray(t, dtype=float))
        return out

    def flow2(t, x):
        out = np.array(x, dtype=float, copy=True)
        out[..., 1] *= np.exp(a2 * np.asarray(t, dtype=float))
        return out

    fields = VectorFieldSet(
        n=2,
        d=2,
        b=_linear_field([[0.0, theta], [theta, 0.0]]),
        sigma=(
            lambda x: np.stack(
                [a1 * np.asarray(x, dtype=float)[..., 0], np.zeros_like(np.asarray(x, dtype=float)[..., 1])],
                axis=-1,
            ),
            lambda x: np.stack(
                [np.zeros_like(np.asarray(x, dtype=float)[..., 0]), a2 * np.asarray(x, dtype=float)[..., 1]],
                axis=-1,
            ),
        ),
        jac_b=_const_mat([[0.0, theta], [theta, 0.0]]),
        jac_sigma=(_const_mat([[a1, 0.0], [0.0, 0.0]]), _const_mat([[0.0, 0.0], [0.0, a2]])),
        exact_flows={0: flow0, 1: flow1, 2: flow2},
    )
    return Problem(
        name="diag-comm",
        fields=fields,
        x0=np.array([1.0, 1.0]),
        T=1.0,
        commutative=True,
        exact_solution=None,
        description="commuting diagonal-linear noise with a coupling drift",
    )


# ---------------------------------------------------------------------------
# linear-nc
# ---------------------------------------------------------------------------

LINNC_K1 = 0.5
LINNC_K2 = 0.4


def _make_linear_nc() -> Problem:
    k1, k2 = LINNC_K1, LINNC_K2
    A1 = np.array([[k1, 0.0], [0.0, -k1]])
    A2 = np.array([[0.0, k2], [k2, 0.0]])
    decay = -0.5 * (k1**2 + k2**2)  # A1^2 + A2^2 = (k1^2 + k2^2) I

    def flow0(t, x):
        return np.asarray(x, dtype=float) * np.exp(decay * _tcol(t))

    def flow1(t, x):
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        return np.stack([x[..., 0] * np.exp(k1 * t), x[..., 1] * np.exp(-k1 * t)], axis=-1)

    def flow2(t, x):
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        c, s = np.cosh(k2 * t), np.sinh(k2 * t)
        return np.stack([x[..., 0] * c + x[..., 1] * s, x[..., 0] * s + x[..., 1] * c], axis=-1)

    fields = VectorFieldSet(
        n=2,
        d=2,
        b=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        sigma=(_linear_field(A1), _linear_field(A2)),
        jac_b=_const_mat(np.zeros((2, 2))),
        jac_sigma=(_const_mat(A1), _const_mat(A2)),
        exact_flows={0: flow0, 1: flow1, 2: flow2},
    )
    return Problem(
        name="linear-nc",
        fields=fields,
        x0=np.array([1.0, 0.5]),
        T=1.0,
        commutative=False,
        exact_solution=None,
        description="non-commuting linear fields, matrix-exponential flows",
    )


_BUILDERS = {
    "gbm1d": _make_gbm1d,
    "heisenberg": _make_heisenberg,
    "diag-comm": _make_diag_comm,
    "linear-nc": _make_linear_nc,
}

PROBLEM_IDS = tuple(_BUILDERS)

_CACHE: dict[str, Problem] = {}


def get_problem(name: str) -> Problem:
    if name not in _BUILDERS:
        raise KeyError(f"unknown problem {name!r}; known: {', '.join(PROBLEM_IDS)}")
    if name not in _CACHE:
        _CACHE[name] = _BUILDERS[name]()
    return _CACHE[name]


def catalog() -> list[Problem]:
    """All catalog problems, in registry order."""
    return [get_problem(name) for name in PROBLEM_IDS]
