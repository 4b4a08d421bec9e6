import numpy as np
import pytest
from hypothesis import given, strategies as st

from gridfree import conic
from gridfree.conic import (HermitianEmbedding, LinearForm, ProblemBuilder, dump_problem,
                            load_problem, realify_hermitian, soc_as_psd, solve)
from gridfree.errors import DomainError, ParseError


def _sym_objective(b, C, blk=0):
    n = C.shape[0]
    for i in range(n):
        for j in range(i, n):
            b.objective.add_entry(blk, i, j, C[i, j] * (1.0 if i == j else 2.0))


def test_two_by_two_correlation_bound():
    # max 2 X01 s.t. X00 = X11 = 1  ->  X01 = 1
    b = ProblemBuilder([2], maximize=True)
    b.objective.add_entry(0, 0, 1, 1.0)
    for i in range(2):
        b.add_equality(LinearForm().add_entry(0, i, i, 1.0), 1.0)
    s = solve(b.build())
    assert s.ok and s.objective_value == pytest.approx(1.0, abs=1e-7)


def test_max_eigenvalue_oracle():
    # max <C, X> s.t. tr X = 1 equals lambda_max(C) (numpy eigvalsh oracle)
    rng = np.random.default_rng(0)
    B = rng.standard_normal((5, 5))
    C = B + B.T
    b = ProblemBuilder([5], maximize=True)
    _sym_objective(b, C)
    f = LinearForm()
    for i in range(5):
        f.add_entry(0, i, i, 1.0)
    b.add_equality(f, 1.0)
    s = solve(b.build())
    assert s.objective_value == pytest.approx(np.linalg.eigvalsh(C)[-1], abs=1e-7)
    assert s.duality_gap <= 1e-8


def test_small_sdp_matches_frozen_clarabel_value():
    # min <C, X> s.t. tr X = 1, X02 = 0.2, X PSD; value frozen from cvxpy/Clarabel
    C = np.array([[2.0, 1, 0], [1, 3, 1], [0, 1, 1]])
    b = ProblemBuilder([3])
    _sym_objective(b, C)
    f = LinearForm()
    for i in range(3):
        f.add_entry(0, i, i, 1.0)
    b.add_equality(f, 1.0)
    b.add_equality(LinearForm().add_entry(0, 0, 2, 1.0), 0.2)
    s = solve(b.build())
    assert s.ok and s.objective_value == pytest.approx(0.47371855084027714, abs=1e-7)


def test_infeasible_detected():
    # X00 = -1 has no PSD solution
    b = ProblemBuilder([1])
    b.objective.add_entry(0, 0, 0, 1.0)
    b.add_equality(LinearForm().add_entry(0, 0, 0, 1.0), -1.0)
    assert solve(b.build()).status == conic.STATUS_INFEASIBLE


def test_free_variables():
    # min X00 + f s.t. X00 - f = 0, X00 + f = 10  ->  X00 = f = 5, objective 10
    b = ProblemBuilder([1], free_vars=1)
    b.objective.add_entry(0, 0, 0, 1.0)
    b.objective.add_free(0, 1.0)
    b.add_equality(LinearForm().add_entry(0, 0, 0, 1.0).add_free(0, -1.0), 0.0)
    b.add_equality(LinearForm().add_entry(0, 0, 0, 1.0).add_free(0, 1.0), 10.0)
    s = solve(b.build())
    assert s.ok
    assert s.free[0] == pytest.approx(5.0, abs=1e-6)
    assert s.objective_value == pytest.approx(10.0, abs=1e-6)


def test_evaluate_reports_residuals():
    b = ProblemBuilder([2])
    b.objective.add_entry(0, 0, 0, 1.0)
    b.add_equality(LinearForm().add_entry(0, 0, 1, 1.0), 0.5)
    p = b.build()
    obj, res = p.evaluate([np.array([[2.0, 0.25], [0.25, 1.0]])])
    assert obj == 2.0 and res[0] == pytest.approx(0.25)


def test_problem_validation():
    with pytest.raises(DomainError):
        ProblemBuilder([0]).build()


def test_dump_round_trip_exact():
    rng = np.random.default_rng(4)
    b = ProblemBuilder([3, 2], free_vars=2, maximize=True)
    for i in range(3):
        for j in range(i, 3):
            b.objective.add_entry(0, i, j, float(rng.standard_normal()))
    b.objective.add_free(1, 0.1)
    for k in range(4):
        f = LinearForm().add_entry(k % 2, 0, 1, float(rng.standard_normal()))
        f.add_entry(0, 2, 2, 1 / 3).add_free(k % 2, 0.7)
        b.add_equality(f, float(rng.standard_normal()))
    p = b.build()
    text = dump_problem(p)
    q = load_problem(text)
    assert dump_problem(q) == text
    for name in ("eq_con", "eq_blk", "eq_row", "eq_col", "eq_val", "free_con", "free_var",
                 "free_val", "rhs", "obj_free"):
        np.testing.assert_array_equal(getattr(p, name), getattr(q, name))
    assert q.maximize and q.psd_blocks == (3, 2)


def test_load_problem_errors_have_locations():
    with pytest.raises(ParseError, match="line 1"):
        load_problem("nonsense\n")
    text = dump_problem(ProblemBuilder([1]).build()) + "bogus 1\n"
    with pytest.raises(ParseError, match="unknown record") as exc:
        load_problem(text)
    assert str(exc.value).count("line") == 1


def _rand_herm(rng, n):
    B = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return B + B.conj().T


@given(st.integers(1, 8), st.integers(0, 2 ** 32 - 1))
def test_realify_round_trip_and_spectrum(n, seed):
    rng = np.random.default_rng(seed)
    H = _rand_herm(rng, n)
    emb = realify_hermitian(n)
    Z = emb.embed(H)
    np.testing.assert_allclose(emb.extract(Z), H, atol=1e-12)
    # each eigenvalue of H appears twice in the real embedding
    ev = np.sort(np.linalg.eigvalsh(H))
    np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(Z))[::2], ev, atol=1e-9)
    np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(Z))[1::2], ev, atol=1e-9)


@given(st.integers(1, 6), st.integers(0, 2 ** 32 - 1))
def test_add_term_is_real_part(n, seed):
    rng = np.random.default_rng(seed)
    H = _rand_herm(rng, n)
    emb = HermitianEmbedding(n)
    p, q = rng.integers(n, size=2)
    coef = complex(*rng.standard_normal(2))
    f = emb.add_term(LinearForm(), int(p), int(q), coef)
    Z = emb.embed(H)
    val = sum(v * (Z[i, j] + Z[j, i]) if i != j else v * Z[i, i] for (_, i, j), v in f.entries.items())
    assert val == pytest.approx((coef * H[p, q]).real, abs=1e-10)


@given(st.integers(1, 6), st.integers(0, 2 ** 32 - 1), st.floats(0.0, 3.0))
def test_soc_block_psd_iff_norm_bound(n, seed, tau):
    rng = np.random.default_rng(seed)
    c = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    soc = soc_as_psd(n)
    W = soc.matrix(c, tau)
    lam = np.linalg.eigvalsh(W)[0]
    nrm = soc.min_tau(c)
    if tau >= nrm + 1e-9:
        assert lam >= -1e-9
    elif tau <= nrm - 1e-9:
        assert lam < 0


def test_arrow_structure_equalities_hold_on_arrow_matrix():
    n = 3
    soc = soc_as_psd(n)
    emb = HermitianEmbedding(n + 1)
    W = soc.matrix(np.array([1 + 1j, 0.5, -2j]), 4.0)
    Z = emb.embed(W)
    for form, rhs in soc.structure_equalities(emb):
        val = sum(v * (Z[i, j] + Z[j, i]) if i != j else v * Z[i, i]
                  for (_, i, j), v in form.entries.items())
        assert val == pytest.approx(rhs, abs=1e-12)


def test_hermitian_psd_program_norm_via_arrow():
    # min tau s.t. arrow(c0, tau) PSD  ->  tau = |c0|
    c0 = np.array([3.0 + 4j, 0.0, 1.0])
    n = 3
    emb = HermitianEmbedding(n + 1, 0)
    soc = soc_as_psd(n)
    b = ProblemBuilder([emb.real_dim])
    emb.add_term(b.objective, n, n, 1.0)
    for form, rhs in soc.structure_equalities(emb):
        b.add_equality(form, rhs)
    for m in range(n):
        for form, rhs in emb.complex_equality([(m, n, 1.0)], c0[m]):
            b.add_equality(form, rhs)
    s = solve(b.build(), {"gap_tol": 1e-10, "feas_tol": 1e-10})
    assert s.objective_value == pytest.approx(np.linalg.norm(c0), abs=1e-7)
