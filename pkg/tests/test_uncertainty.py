import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lipuncertainty.errors import DomainEscape, NonUnitState, NotHermitian
from lipuncertainty.lipnorm import composite_coefficients, difference_quotient
from lipuncertainty.model import (
    ComponentwiseMap,
    DomainSpec,
    GeneratorConfig,
    Instance,
    LinearFunctional,
    LinearMap,
    Mode,
    PinnedPolynomial,
    ScaledTanh,
    complex_gaussian,
    generate_instance,
    random_hermitian,
)
from lipuncertainty.space import INF, NormSpec, dual_norm, norm
from lipuncertainty.uncertainty import (
    EMPIRICAL,
    PASS,
    VIOLATION,
    ChainReport,
    anticommutator_apply,
    build_chain,
    chain_nhrs,
    check_hermitian,
    commutator_apply,
    corollary_anticommutator,
    corollary_commutator,
    delta,
    delta_hilbert,
    delta_hilbert_sqrt,
    evaluation_point,
    expectation,
    hilbert_reduction_check,
    mean_chain_terms,
    middle_form,
    nabla,
    nhrs_parts,
    robertson_chain,
    schrodinger_bound,
    schrodinger_chain,
)

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]])
SZ = np.diag([1.0, -1.0]).astype(complex)
E1 = np.array([1, 0], dtype=complex)
E2 = np.array([0, 1], dtype=complex)
F1 = LinearFunctional(E1)  # u -> <u, e1>


def unit_dom(dim=2, p=2):
    return DomainSpec(1.0, np.zeros((1, dim)), p)


def pauli_instance(A=SX, B=SY):
    dom = DomainSpec(1.0, np.array([[0, 0], [1, 0], [0, 1]], dtype=complex))
    return Instance(Mode.HILBERT, 0, NormSpec(2), dom, dom, LinearMap(A), LinearMap(B), E1, F1)


# ---------------------------------------------------------------------------
# delta and nabla


def test_delta_examples():
    assert delta(LinearMap(np.eye(2)), E1, F1) == 0.0
    assert delta(LinearMap(SY), E1, F1, 2) == pytest.approx(1.0)
    rng = np.random.default_rng(0)
    x = complex_gaussian(rng, 3)
    f = LinearFunctional(x / np.vdot(x, x).conj())
    # eigenvector: Bx = 2.5 x
    B = LinearMap(np.diag([2.5, 2.5, 2.5]))
    assert delta(B, x, f, INF) <= 1e-15


def test_delta_warns_on_unnormalized_functional():
    with pytest.warns(RuntimeWarning):
        delta(LinearMap(SX), E1, LinearFunctional(2 * E1))


def test_nabla_examples():
    assert nabla(F1, LinearMap(np.eye(2)), E1, unit_dom()).exact == 0.0
    est = nabla(F1, LinearMap(SX), E1, unit_dom())
    assert est.exact == pytest.approx(1.0)
    assert est.exact == pytest.approx(delta_hilbert(SX, E1))


@pytest.mark.parametrize("p", [1.0, 2.0, 3.0, INF])
def test_nabla_linear_matches_dual_norm_of_composite(p):
    inst = generate_instance(3, GeneratorConfig(Mode.BANACH_LINEAR, dim=4, p=p))
    est = nabla(inst.f, inst.A, inst.x, inst.M, inst.norm)
    c = inst.f(inst.A(inst.x))
    assert est.exact == pytest.approx(dual_norm(composite_coefficients(inst.f, inst.A, c), p))
    g = lambda u: inst.f(inst.A(u)) - c * inst.f(u)
    assert difference_quotient(g, *est.witness, p) == pytest.approx(est.exact, rel=1e-9)


def test_nabla_nonlinear_identity_like_is_zero():
    A = ComponentwiseMap(PinnedPolynomial((1.0,)))
    rng = np.random.default_rng(1)
    cloud = np.concatenate([np.zeros((1, 2)), 0.5 * complex_gaussian(rng, (10, 2)) / 3])
    # g = f - f(x) f with f(x) = 1 is identically zero
    x = np.array([1.0, 0.0])
    est = nabla(F1, A, x, DomainSpec(1.0, cloud), budget=200)
    assert est.lower <= 1e-15


# ---------------------------------------------------------------------------
# Hilbert quantities


def test_delta_hilbert_examples():
    assert delta_hilbert(np.eye(2), E1) == 0.0
    assert delta_hilbert(SX, E1) == pytest.approx(1.0)
    h = np.array([1, 1]) / math.sqrt(2)
    assert delta_hilbert(SZ, h) == pytest.approx(1.0, abs=1e-12)


def test_delta_hilbert_rejects_bad_input():
    with pytest.raises(NonUnitState):
        delta_hilbert(SX, 2 * E1)
    with pytest.raises(NotHermitian):
        delta_hilbert(np.array([[0, 1], [0, 0]]), E1)
    with pytest.raises(NotHermitian):
        expectation(np.array([[1j, 0], [0, 0]]), E1)


@pytest.mark.parametrize("seed", range(200))
def test_delta_hilbert_sqrt_form_agrees(seed):
    rng = np.random.default_rng(seed)
    dim = 2 + seed % 7
    a = random_hermitian(rng, dim)
    h = complex_gaussian(rng, dim)
    h /= np.linalg.norm(h)
    assert abs(delta_hilbert(a, h) - delta_hilbert_sqrt(a, h)) <= 1e-10 * (1 + delta_hilbert(a, h))


def test_commutator_examples():
    np.testing.assert_allclose(commutator_apply(LinearMap(SX), LinearMap(SY), E1), [2j, 0])
    np.testing.assert_allclose(commutator_apply(LinearMap(SX), LinearMap(SY), E1),
                               2j * SZ @ E1)
    np.testing.assert_array_equal(commutator_apply(LinearMap(SX), LinearMap(SX), E1), [0, 0])
    D1, D2 = LinearMap(np.diag([1, 2j])), LinearMap(np.diag([-3, 0.5]))
    np.testing.assert_array_equal(commutator_apply(D1, D2, [0.3, 1j]), [0, 0])
    np.testing.assert_allclose(anticommutator_apply(LinearMap(SX), LinearMap(SY), E1), [0, 0])


def test_commutator_domain_escape():
    A = ComponentwiseMap(PinnedPolynomial((1.0,)))
    B = ComponentwiseMap(PinnedPolynomial((3.0,)))
    dom = DomainSpec(1.0, np.zeros((1, 2)))
    with pytest.raises(DomainEscape):
        commutator_apply(A, B, [0.5, 0], dom, dom)
    # linear maps are defined everywhere
    commutator_apply(LinearMap(3 * np.eye(2)), LinearMap(SX), [0.5, 0], dom, dom)


def test_middle_form_examples():
    assert middle_form(F1, LinearMap(np.eye(2)), E1, LinearMap(SY)) == 0.0
    np.testing.assert_allclose(evaluation_point(LinearMap(SY), E1, F1), [0, 1j])
    assert middle_form(F1, LinearMap(SX), E1, LinearMap(SY)) == pytest.approx(1.0)


@pytest.mark.parametrize("seed", range(20))
def test_middle_form_equals_final_form_for_linear_data(seed):
    inst = generate_instance(seed, GeneratorConfig(Mode.BANACH_LINEAR, dim=3, p=1.5))
    f, A, B, x = inst.f, inst.A, inst.B, inst.x
    final = abs(f(A(B(x))) - f(A(x)) * f(B(x)))
    assert middle_form(f, A, x, B) == pytest.approx(final, rel=1e-9, abs=1e-12)


def test_middle_form_domain_escape():
    A = ComponentwiseMap(ScaledTanh(1.0, 1.0))
    B = LinearMap([[0, 0], [5, 0]])
    dom = DomainSpec(1.0, np.zeros((1, 2)))
    f = LinearFunctional([1 / 0.3, 0])
    # y = Bx - f(Bx) x = (0, 1.5) lies outside the unit ball
    with pytest.raises(DomainEscape):
        middle_form(f, A, [0.3, 0], B, dom)


# ---------------------------------------------------------------------------
# chains


def test_chain_zero_maps():
    inst = pauli_instance(np.zeros((2, 2)), np.zeros((2, 2)))
    r = chain_nhrs(inst)
    assert all(v == 0 for v in r.terms.values())
    assert not r.violated and r.status == PASS


def test_chain_pauli_equality():
    r = chain_nhrs(pauli_instance())
    for key in ("half_sum_squares", "quarter_square_sum", "product", "middle_form",
                "final_bound"):
        assert r.terms[key] == pytest.approx(1.0, abs=1e-12)
    assert all(abs(s) <= 1e-12 for s in r.slacks.values())
    assert all(r.exact.values())


def test_corollary_commutator_pauli():
    # nabla = delta(B) = ||fB|| = delta(A) = 1 and |f([A,B]e1)| = |2i| = 2
    r = corollary_commutator(pauli_instance())
    assert r.terms["lhs"] == pytest.approx(2.0)
    assert r.terms["rhs"] == pytest.approx(2.0)
    assert r.terms["fb_norm"] == pytest.approx(1.0)
    assert r.status == PASS


def test_corollary_commutator_equal_maps():
    r = corollary_commutator(pauli_instance(SX, SX))
    assert r.terms["rhs"] == 0.0 and r.status == PASS


def test_corollary_anticommutator_pauli_and_zero_map():
    r = corollary_anticommutator(pauli_instance())
    assert r.terms["rhs"] == pytest.approx(0.0, abs=1e-15)
    r0 = corollary_anticommutator(pauli_instance(np.zeros((2, 2)), SY))
    assert r0.terms["delta_a"] == 0.0 and r0.terms["rhs"] == 0.0
    assert r0.terms["nabla_delta_b"] == 0.0 and r0.status == PASS


@pytest.mark.parametrize("seed", range(30))
def test_sign_symmetry(seed):
    inst = generate_instance(seed, GeneratorConfig(Mode.BANACH_LINEAR, dim=3, p=INF))
    A, x, f, p = inst.A, inst.x, inst.f, inst.norm
    plus = norm(A(x) + f(A(x)) * x, p)  # delta(A, x, -f)
    minus_x = delta(A, -x, f, p, check=False)  # delta(A, -x, f)
    assert plus == pytest.approx(minus_x, abs=1e-12)
    r = corollary_anticommutator(inst)
    assert r.terms["delta_a"] == pytest.approx(r.terms["delta_a_neg_x"], abs=1e-12)


def test_hilbert_reduction_examples():
    assert hilbert_reduction_check(np.eye(2), E1) == (0.0, 0.0, 0.0)
    r = hilbert_reduction_check(SX, E1)
    assert r.nabla == pytest.approx(1.0) and r.delta == pytest.approx(1.0)
    assert r.discrepancy <= 1e-15
    with pytest.raises(NotHermitian):
        hilbert_reduction_check(np.array([[0, 1], [0, 0]]), E1)


def test_robertson_pauli_equalities():
    r = robertson_chain(SX, SY, E1)
    for key in ("half_sum_squares", "quarter_square_sum", "product", "robertson_bound"):
        assert r.terms[key] == pytest.approx(1.0, abs=1e-12)
    assert r.status == PASS


def test_robertson_self_commutator():
    rng = np.random.default_rng(2)
    a = random_hermitian(rng, 3)
    h = complex_gaussian(rng, 3)
    h /= np.linalg.norm(h)
    r = robertson_chain(a, a, h)
    assert r.terms["robertson_bound"] == pytest.approx(0.0, abs=1e-14)
    assert r.slacks["product>=robertson_bound"] == pytest.approx(delta_hilbert(a, h) ** 2,
                                                                  abs=1e-14)


def test_schrodinger_examples():
    s = schrodinger_bound(SX, SY, E1)
    assert s == pytest.approx((1.0, 1.0, 1.0))
    rng = np.random.default_rng(3)
    a = random_hermitian(rng, 4)
    h = complex_gaussian(rng, 4)
    h /= np.linalg.norm(h)
    s = schrodinger_bound(a, a, h)
    d2 = delta_hilbert(a, h) ** 2
    assert s.covariance_form == pytest.approx(d2) and s.product == pytest.approx(d2)
    assert schrodinger_chain(SX, SY, E1).status == PASS


def test_hilbert_nhrs_final_form_is_schrodinger_covariance():
    for seed in range(20):
        inst = generate_instance(seed, GeneratorConfig(Mode.HILBERT, dim=3))
        r = chain_nhrs(inst)
        s = schrodinger_bound(inst.A.matrix, inst.B.matrix, inst.x)
        assert r.terms["final_bound"] == pytest.approx(s.covariance_form, rel=1e-9, abs=1e-12)
        assert r.terms["product"] == pytest.approx(s.product, rel=1e-9)


# ---------------------------------------------------------------------------
# properties


@settings(max_examples=500)
@given(st.floats(0, 1e6), st.floats(0, 1e6))
def test_mean_inequalities(a, b):
    t = mean_chain_terms(a, b)
    ulp = 4 * np.finfo(float).eps * max(1.0, t["half_sum_squares"])
    assert t["half_sum_squares"] - t["quarter_square_sum"] >= -ulp
    assert t["quarter_square_sum"] - t["product"] >= -ulp
    # both gaps equal (a - b)^2 / 4
    assert t["half_sum_squares"] - t["quarter_square_sum"] == pytest.approx(
        (a - b) ** 2 / 4, abs=ulp)


@settings(max_examples=100)
@given(st.integers(0, 2**32 - 1), st.complex_numbers(max_magnitude=100))
def test_delta_homogeneity(seed, t):
    inst = generate_instance(seed, GeneratorConfig(Mode.BANACH_LINEAR, dim=3, p=3))
    base = delta(inst.B, inst.x, inst.f, inst.norm)
    scaled = delta(inst.B.scaled(t), inst.x, inst.f, inst.norm)
    assert scaled == pytest.approx(abs(t) * base, rel=1e-12, abs=1e-300)


@pytest.mark.parametrize("seed", range(60))
def test_middle_form_consistency_on_nonlinear_instances(seed):
    inst = generate_instance(seed, GeneratorConfig(Mode.BANACH_NONLINEAR, dim=2 + seed % 3,
                                                   p=[1, 2, INF][seed % 3], cloud_size=32))
    try:
        parts = nhrs_parts(inst, 200)
    except DomainEscape:
        pytest.skip("domain escape")
    y_norm = norm(parts.y, inst.norm)
    assert parts.nabla.lower * y_norm >= parts.middle - 1e-12
    r = chain_nhrs(inst, parts=parts)
    assert r.exact["product>=middle_form"] and not r.exact["product>=final_bound"]
    assert r.terms["nabla_upper"] >= r.terms["nabla"]


def test_chain_report_bookkeeping():
    r = build_chain("t", {"a": 1.0, "b": 2.0, "c": 0.5}, [("a", "b"), ("b", "c")],
                    {"a>=b": False})
    assert r.recompute_slacks() == r.slacks
    assert r.violated == (r.min_slack < -r.tol)
    assert r.status == EMPIRICAL and not r.exact_violation
    r2 = build_chain("t", {"a": 1.0, "b": 2.0}, [("a", "b")])
    assert r2.status == VIOLATION
    assert r2.tol == pytest.approx(1e-10 + 2e-10)
    assert ChainReport.from_json(r.to_json()) == r
