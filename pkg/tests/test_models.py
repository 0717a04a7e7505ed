import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nvlab import (
    PROBLEM_IDS,
    VectorFieldSet,
    build_bracket_table,
    catalog,
    get_problem,
    lie_bracket,
    stratonovich_drift,
)
from nvlab.catalog import GBM_MU, GBM_SIGMA, LINNC_K1, LINNC_K2

from conftest import sample_states

state2 = st.lists(st.floats(-3, 3), min_size=2, max_size=2).map(np.array)


def test_catalog_contents():
    probs = {p.name: p for p in catalog()}
    assert set(probs) == {"gbm1d", "heisenberg", "diag-comm", "linear-nc"}
    assert probs["heisenberg"].commutative is False
    assert probs["diag-comm"].commutative is True
    assert probs["gbm1d"].commutative is True
    assert probs["linear-nc"].commutative is False
    assert set(PROBLEM_IDS) == set(probs)


def test_gbm_exact_solution_zero_noise(gbm):
    # closed form at t=T with W_T = 0
    rate = GBM_MU - 0.5 * GBM_SIGMA**2
    assert np.isclose(gbm.x0[0] * np.exp(rate * gbm.T), np.exp(rate))


def test_stratonovich_drift_gbm(gbm):
    xs = sample_states(gbm)
    expected = (GBM_MU - 0.5 * GBM_SIGMA**2) * xs
    np.testing.assert_allclose(stratonovich_drift(gbm.fields, xs), expected, atol=1e-14)


def test_stratonovich_drift_heisenberg_vanishes(heisenberg):
    xs = sample_states(heisenberg)
    np.testing.assert_array_equal(stratonovich_drift(heisenberg.fields, xs), np.zeros_like(xs))


def test_stratonovich_drift_constant_fields_is_drift():
    # all Jacobians vanish, so the correction drops out
    drift = np.array([0.3, -0.7])
    fields = VectorFieldSet(
        n=2,
        d=2,
        b=lambda x: np.broadcast_to(drift, np.asarray(x).shape).copy(),
        sigma=(
            lambda x: np.broadcast_to([1.0, 2.0], np.asarray(x).shape).copy(),
            lambda x: np.broadcast_to([-1.0, 0.5], np.asarray(x).shape).copy(),
        ),
        jac_b=lambda x: np.zeros(np.asarray(x).shape + (2,)),
        jac_sigma=(
            lambda x: np.zeros(np.asarray(x).shape + (2,)),
            lambda x: np.zeros(np.asarray(x).shape + (2,)),
        ),
    )
    x = np.array([1.0, 4.0])
    np.testing.assert_array_equal(stratonovich_drift(fields, x), drift)


def test_stratonovich_drift_dimension_mismatch(heisenberg):
    with pytest.raises(ValueError):
        stratonovich_drift(heisenberg.fields, np.zeros(3))


@given(state2)
def test_lie_bracket_heisenberg_constant(x):
    heis = get_problem("heisenberg")
    np.testing.assert_array_equal(lie_bracket(heis.fields, 2, 1, x), np.array([0.0, -1.0]))


@given(state2)
def test_lie_bracket_diag_comm_vanishes(x):
    dc = get_problem("diag-comm")
    np.testing.assert_array_equal(lie_bracket(dc.fields, 2, 1, x), np.zeros(2))


def test_lie_bracket_linear_matrix_commutator(linear_nc):
    A1 = LINNC_K1 * np.array([[1.0, 0.0], [0.0, -1.0]])
    A2 = LINNC_K2 * np.array([[0.0, 1.0], [1.0, 0.0]])
    comm = A1 @ A2 - A2 @ A1
    xs = sample_states(linear_nc, count=20)
    expected = xs @ comm.T
    np.testing.assert_allclose(lie_bracket(linear_nc.fields, 2, 1, xs), expected, atol=1e-13)


def test_lie_bracket_index_validation(heisenberg):
    for j, m in [(1, 1), (1, 2), (3, 1), (2, 0)]:
        with pytest.raises(ValueError):
            lie_bracket(heisenberg.fields, j, m, np.zeros(2))


def test_bracket_antisymmetry_all_problems(problems):
    # [s^j, s^m] must equal minus the reversed composition of Jacobian products
    for prob in problems.values():
        if prob.d < 2:
            continue
        xs = sample_states(prob, count=50)
        for j in range(2, prob.d + 1):
            for m in range(1, j):
                br = lie_bracket(prob.fields, j, m, xs)
                reversed_combo = prob.fields.dsigma_sigma(j, m, xs) - prob.fields.dsigma_sigma(
                    m, j, xs
                )
                assert np.max(np.abs(br + reversed_combo)) <= 1e-12


def test_bracket_table_matches_op(heisenberg):
    table = build_bracket_table(heisenberg.fields)
    assert table.pairs == ((2, 1),)
    x = np.array([0.4, -1.2])
    np.testing.assert_array_equal(table(2, 1, x), lie_bracket(heisenberg.fields, 2, 1, x))


def _fd_jacobian(f, x, step=1e-6):
    n = x.shape[-1]
    cols = []
    for k in range(n):
        e = np.zeros(n)
        e[k] = step
        cols.append((f(x + e) - f(x - e)) / (2 * step))
    return np.stack(cols, axis=-1)


def test_jacobians_match_finite_differences(problems):
    for prob in problems.values():
        xs = sample_states(prob, count=100, seed=77)
        pairs = [(prob.fields.b, prob.fields.jac_b)]
        pairs += [(prob.fields.sigma[j], prob.fields.jac_sigma[j]) for j in range(prob.d)]
        for func, jac in pairs:
            analytic = jac(xs)
            fd = _fd_jacobian(func, xs)
            scale = 1.0 + np.abs(analytic)
            assert np.max(np.abs(analytic - fd) / scale) <= 1e-5, prob.name


def test_commutativity_flags_sound(problems):
    for prob in problems.values():
        if prob.d < 2:
            continue
        xs = sample_states(prob, count=50, seed=5)
        norms = np.linalg.norm(lie_bracket(prob.fields, 2, 1, xs), axis=-1)
        if prob.commutative:
            assert np.max(norms) <= 1e-12
        else:
            assert np.min(norms) > 0.0


def test_heisenberg_bracket_norm_is_one(heisenberg):
    xs = sample_states(heisenberg, count=30)
    norms = np.linalg.norm(lie_bracket(heisenberg.fields, 2, 1, xs), axis=-1)
    np.testing.assert_array_equal(norms, np.ones(30))


def test_dimension_cap_enforced():
    with pytest.raises(ValueError):
        VectorFieldSet(
            n=17,
            d=1,
            b=lambda x: x,
            sigma=(lambda x: x,),
            jac_b=lambda x: None,
            jac_sigma=(lambda x: None,),
        )


def test_field_count_must_match_d():
    with pytest.raises(ValueError):
        VectorFieldSet(
            n=1,
            d=2,
            b=lambda x: x,
            sigma=(lambda x: x,),
            jac_b=lambda x: None,
            jac_sigma=(lambda x: None,),
        )


def test_problem_descriptor_keys(heisenberg):
    desc = heisenberg.descriptor()
    assert desc == {
        "id": "heisenberg",
        "n": 2,
        "d": 2,
        "T": 1.0,
        "x0": [0.0, 0.0],
        "commutative_flag": False,
    }


def test_unknown_problem_rejected():
    with pytest.raises(KeyError):
        get_problem("does-not-exist")


def test_exact_flows_identity_at_zero(problems):
    from nvlab.flows import apply_flow

    for prob in problems.values():
        xs = sample_states(prob, count=10, seed=3)
        for idx in prob.fields.exact_flows:
            np.testing.assert_array_equal(apply_flow(prob, idx, 0.0, xs), xs)
