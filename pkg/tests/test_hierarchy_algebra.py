import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from hierakit import coefficients as coef
from hierakit.functional_algebra import constant, trace_functional
from hierakit.hierarchy_algebra import (
    DensityHierarchy,
    FiniteN,
    HierarchyDepthError,
    Infinite,
    ObservableHierarchy,
    OperatorAlgebra,
    bracket_inf,
    bracket_N,
    coefficient_table,
    dot_trace,
    dot_trace_complex,
    epsilon,
    iota_epsilon,
    lie_bracket,
    poisson_bracket,
    vector_field,
    vector_field_inf,
    vector_field_N,
)
from hierakit.instances import (
    random_density_hierarchy,
    random_functional,
    random_observable_hierarchy,
    random_self_adjoint_bosonic,
    random_skew_bosonic,
)
from hierakit.tensor_core import KOperator, Weights, identity, sym_op, trace_pair

seeds = st.integers(0, 2**32 - 1)


def skew(rng, k, d=2):
    return random_skew_bosonic(rng, k, d)


def hierarchy(rng, support, ctx, d=2):
    return random_observable_hierarchy(rng, support, d, ctx)


def residual(X, Y):
    return (X - Y).norm_max()


# -- containers ------------------------------------------------------------------------------
def test_observable_hierarchy_validation(rng):
    with pytest.raises(ValueError, match="skew"):
        ObservableHierarchy({1: 1j * skew(rng, 1)})
    with pytest.raises(ValueError, match="bosonic"):
        M = rng.standard_normal((4, 4))
        ObservableHierarchy({2: KOperator(2, 2, M - M.T)})
    with pytest.raises(ValueError, match="support"):
        ObservableHierarchy({3: skew(rng, 3)}, FiniteN(2))
    with pytest.raises(ValueError):
        ObservableHierarchy({1: skew(rng, 1)}, OperatorAlgebra(2))
    with pytest.raises(ValueError):
        FiniteN(0)


def test_density_hierarchy_validation(rng):
    with pytest.raises(ValueError, match="self-adjoint"):
        DensityHierarchy({1: skew(rng, 1)})
    gamma = DensityHierarchy.factorized(rng.standard_normal(3), 3, 0.5)
    assert gamma.support == (1, 2, 3)
    assert gamma.truncate(2).support == (1, 2)
    assert gamma.weights.h == 0.5


def test_hierarchy_arithmetic(rng):
    A = hierarchy(rng, (1, 2), Infinite())
    B = hierarchy(rng, (2,), Infinite())
    assert (A + B - B).distance(A) < 1e-15
    assert (2 * A).distance(A + A) < 1e-15
    assert (-A + A).norm_max() == 0


def test_density_hermitized_reports_correction(rng):
    gamma = random_density_hierarchy(rng, 2, 2)
    bad = DensityHierarchy({1: gamma[1] + KOperator(1, 2, 1e-6j * np.eye(2))}, validate=False)
    fixed, worst = bad.hermitized()
    assert worst == pytest.approx(1e-6)
    assert fixed[1].allclose(gamma[1], 1e-14)


# -- epsilon ----------------------------------------------------------------------------------
def test_epsilon_one_into_two(rng):
    A = skew(rng, 1)
    expected = 0.5 * (np.kron(A.data, np.eye(2)) + np.kron(np.eye(2), A.data))
    assert np.allclose(epsilon(A, 2).data, expected)


def test_epsilon_same_level_is_identity_on_bosonic(rng):
    A = skew(rng, 2)
    assert epsilon(A, 2).allclose(A, 1e-14)
    B = skew(rng, 3)
    assert epsilon(B, 3).allclose(B, 1e-13)


def test_epsilon_one_into_three(rng):
    X = skew(rng, 1).data
    I = np.eye(2)
    expected = (np.kron(np.kron(X, I), I) + np.kron(np.kron(I, X), I) + np.kron(np.kron(I, I), X)) / 3
    assert np.allclose(epsilon(KOperator(1, 2, X), 3).data, expected)


@pytest.mark.parametrize("k,N", [(1, 3), (2, 3), (2, 4), (3, 4)])
def test_epsilon_matches_oracle_and_preserves_structure(rng, k, N):
    A = skew(rng, k)
    E = epsilon(A, N)
    assert np.allclose(E.data, oracles.epsilon(A.data, k, N, 2))
    assert E.is_skew_adjoint(1e-13) and E.is_bosonic(1e-13)


def test_epsilon_is_injective_on_bosonic(rng):
    # the embedding averages placements, so its norm is bounded below by a fixed fraction of the input
    for k, N in [(1, 3), (2, 3), (2, 4)]:
        A = skew(rng, k)
        assert epsilon(A, N).norm_max() > 1e-3 * A.norm_max()


def test_epsilon_rejects_too_many_particles(rng):
    with pytest.raises(ValueError):
        epsilon(skew(rng, 3), 2)


def test_iota_epsilon_examples(rng):
    A = skew(rng, 1)
    H = ObservableHierarchy({1: A}, FiniteN(3))
    assert iota_epsilon(H, 3).allclose(epsilon(A, 3), 0)
    zero = iota_epsilon(ObservableHierarchy({}, FiniteN(3)), 3, dim=2)
    assert zero.norm_max() == 0
    with pytest.raises(ValueError):
        iota_epsilon(ObservableHierarchy({}, FiniteN(3)), 3)


def test_iota_epsilon_matches_oracle(rng):
    H = hierarchy(rng, (1, 2, 3), FiniteN(3))
    expected = oracles.iota_epsilon({k: op.data for k, op in H.items()}, 3, 2)
    assert np.allclose(iota_epsilon(H, 3).data, expected)


# -- homomorphism -----------------------------------------------------------------------------
def homomorphism_gap(A, B, N):
    lhs = iota_epsilon(bracket_N(A, B, N), N, 2)
    left, right = iota_epsilon(A, N, 2), iota_epsilon(B, N, 2)
    rhs = N * left.commutator(right)
    return (lhs - rhs).norm_max()


@pytest.mark.parametrize("N,support", [(2, (1, 2)), (3, (1, 2)), (3, (1, 2, 3)), (4, (1, 2))])
def test_homomorphism(rng, N, support):
    for _ in range(3):
        A, B = hierarchy(rng, support, FiniteN(N)), hierarchy(rng, support, FiniteN(N))
        assert homomorphism_gap(A, B, N) < 1e-10


def test_homomorphism_truncated_two_by_two(rng):
    # N=3, l=j=2: one- and two-particle overlaps both land in component 3
    A = hierarchy(rng, (2,), FiniteN(3))
    B = hierarchy(rng, (2,), FiniteN(3))
    C = bracket_N(A, B, 3)
    assert C.support == (3,)
    assert homomorphism_gap(A, B, 3) < 1e-10


def test_rising_product_multiplicity_breaks_homomorphism(rng, monkeypatch):
    """With l=j=N=3 the only term shares r=3 particles and has no spectators.

    The weight must then use multiplicity 1; the rising product over r-1
    factors gives 2 and the embedding identity fails by a visible margin.
    """
    A = hierarchy(rng, (3,), FiniteN(3))
    B = hierarchy(rng, (3,), FiniteN(3))
    assert homomorphism_gap(A, B, 3) < 1e-10

    def rising(ell, j, k, r, N):
        return math.prod(N - k + m for m in range(1, r))

    monkeypatch.setattr(coef, "multiplicity", rising)
    assert homomorphism_gap(A, B, 3) > 1e-3


def test_corrupted_coefficients_break_homomorphism(rng):
    A, B = hierarchy(rng, (1, 2), FiniteN(3)), hierarchy(rng, (1, 2), FiniteN(3))
    with coef.corrupted_coefficients(1.1, r=2):
        assert homomorphism_gap(A, B, 3) > 1e-4


# -- brackets ---------------------------------------------------------------------------------
def test_bracket_one_particle_is_commutator(rng):
    A, B = skew(rng, 1), skew(rng, 1)
    for N in (1, 2, 7):
        C = bracket_N(ObservableHierarchy({1: A}, FiniteN(N)), ObservableHierarchy({1: B}, FiniteN(N)), N)
        assert np.allclose(C[1].data, A.data @ B.data - B.data @ A.data)
    C = bracket_inf(ObservableHierarchy({1: A}), ObservableHierarchy({1: B}))
    assert np.allclose(C[1].data, A.data @ B.data - B.data @ A.data)


def test_bracket_self_is_zero(rng):
    A = hierarchy(rng, (1, 2), FiniteN(4))
    assert bracket_N(A, A, 4).norm_max() < 1e-14
    A = hierarchy(rng, (1, 2), Infinite())
    assert bracket_inf(A, A).norm_max() < 1e-14


def test_bracket_supports(rng):
    A, B = hierarchy(rng, (2,), Infinite()), hierarchy(rng, (3,), Infinite())
    assert bracket_inf(A, B).support == (4,)
    A, B = hierarchy(rng, (2,), FiniteN(3)), hierarchy(rng, (3,), FiniteN(3))
    assert bracket_N(A, B, 3).support == (3,)


def test_bracket_output_is_skew_bosonic(rng):
    A, B = hierarchy(rng, (1, 2), FiniteN(3)), hierarchy(rng, (1, 2), FiniteN(3))
    C = bracket_N(A, B, 3)
    ObservableHierarchy(C.entries, FiniteN(3), validate=True, tol=1e-12)
    C = bracket_inf(A.with_context(Infinite()), B.with_context(Infinite()))
    ObservableHierarchy(C.entries, Infinite(), validate=True, tol=1e-12)


def test_bracket_inf_against_contraction_oracle(rng):
    a, b = skew(rng, 1), skew(rng, 2)
    A, B = ObservableHierarchy({1: a}), ObservableHierarchy({2: b})
    # binom(2, 1) a o_1 b - binom(1, 1) b o_1 a
    raw = 2 * oracles.contract(a.data, 1, b.data, 2, 1, 2, 2) - oracles.contract(b.data, 2, a.data, 1, 1, 2, 2)
    assert np.allclose(bracket_inf(A, B)[2].data, oracles.sym(raw, 2, 2))


def test_bracket_rejects_large_support(rng):
    A = hierarchy(rng, (3,), Infinite())
    with pytest.raises(ValueError):
        bracket_N(A, A, 2)


def test_lie_bracket_dispatch(rng):
    A = hierarchy(rng, (1,), FiniteN(3))
    assert lie_bracket(A, A, FiniteN(3)).context == FiniteN(3)
    assert lie_bracket(A, A, Infinite()).context == Infinite()
    X = ObservableHierarchy({2: skew(rng, 2)}, OperatorAlgebra(2))
    Y = ObservableHierarchy({2: skew(rng, 2)}, OperatorAlgebra(2))
    Z = lie_bracket(X, Y, OperatorAlgebra(2))
    assert np.allclose(Z[2].data, 2 * (X[2].data @ Y[2].data - Y[2].data @ X[2].data))
    with pytest.raises(TypeError):
        lie_bracket(A, A, "nope")


def jacobi(A, B, C, ctx):
    br = lambda X, Y: lie_bracket(X, Y, ctx)  # noqa: E731
    return (br(A, br(B, C)) + br(B, br(C, A)) + br(C, br(A, B))).norm_max()


@pytest.mark.parametrize("ctx", [FiniteN(2), FiniteN(3), FiniteN(6), Infinite()])
def test_jacobi(rng, ctx):
    A, B, C = (hierarchy(rng, (1, 2), ctx) for _ in range(3))
    assert jacobi(A, B, C, ctx) < 1e-10


def test_coefficient_table_rows():
    rows = coefficient_table(3, 3)
    assert (1, 1, 1, 1, "1") in rows
    assert (2, 2, 3, 1, "1/2") in rows
    assert (3, 3, 3, 3, str(coef.bracket_coefficient(3, 3, 3, 3))) in rows
    assert all(max(r[0], r[1]) <= 3 for r in rows)


# -- convergence in N -------------------------------------------------------------------------
FROZEN_SLOPE = -1.055708071910529  # np.polyfit(log N, log 1/(N-1)) over N = 8, 16, 32, 64


def test_convergence_closed_form(rng):
    """For supports {1, 2} the bracket difference is exactly ``(S2 - S1)/(N - 1)`` at level 3.

    ``S_r = Sym [A2, B2]_r`` is built here from the loop contraction oracle.
    Levels 1 and 2 agree exactly because their weights are 1 for every N.
    """
    a1, a2, b1, b2 = skew(rng, 1), skew(rng, 2), skew(rng, 1), skew(rng, 2)

    def comm(r, k):
        raw = oracles.contract(a2.data, 2, b2.data, 2, r, k, 2) - oracles.contract(b2.data, 2, a2.data, 2, r, k, 2)
        return math.comb(2, r) * oracles.sym(raw, k, 2)

    gap = np.max(np.abs(comm(2, 3) - comm(1, 3)))
    Ns = [8, 16, 32, 64]
    diffs = []
    for N in Ns:
        A = ObservableHierarchy({1: a1, 2: a2}, FiniteN(N))
        B = ObservableHierarchy({1: b1, 2: b2}, FiniteN(N))
        fin = bracket_N(A, B, N)
        lim = bracket_inf(A.with_context(Infinite()), B.with_context(Infinite()))
        assert residual(fin[1], lim[1]) < 1e-14
        assert residual(fin[2], lim[2]) < 1e-14
        d = residual(fin[3], lim[3])
        assert d * (N - 1) == pytest.approx(gap, rel=1e-10)
        diffs.append(d)
    slope = np.polyfit(np.log(Ns), np.log(diffs), 1)[0]
    assert slope == pytest.approx(FROZEN_SLOPE, abs=1e-9)
    assert -1.1 <= slope <= -0.9


# -- pairing and Poisson brackets ---------------------------------------------------------------
def test_dot_trace_identity_gives_norm(rng):
    f = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    gamma = DensityHierarchy({1: KOperator.outer(f, f, 1, 3)}, Weights(0.2))
    A = ObservableHierarchy({1: -1j * identity(1, 3)})
    assert dot_trace(A, gamma) == pytest.approx(0.2 * np.vdot(f, f).real)


def test_dot_trace_zero_and_real(rng):
    gamma = random_density_hierarchy(rng, 2, 2, 0.3)
    assert dot_trace(ObservableHierarchy({}), gamma) == 0
    A = hierarchy(rng, (1, 2), Infinite())
    assert abs(dot_trace_complex(A, gamma).imag) < 1e-12
    expected = sum(1j * oracles.trace_pair(A[k].data, gamma[k].data, 0.3, k) for k in (1, 2))
    assert dot_trace(A, gamma) == pytest.approx(expected.real, abs=1e-12)


def test_dot_trace_missing_level(rng):
    with pytest.raises(HierarchyDepthError):
        dot_trace(hierarchy(rng, (3,), Infinite()), random_density_hierarchy(rng, 2, 2))


@pytest.mark.parametrize("ctx", [FiniteN(3), Infinite()])
def test_poisson_bracket_trivial_cases(rng, ctx):
    gamma = random_density_hierarchy(rng, 3, 2)
    F = random_functional(rng, 2, (1, 2), ctx)
    assert abs(poisson_bracket(F, F, gamma, ctx)) < 1e-12
    assert poisson_bracket(F, constant(2.0, ctx), gamma, ctx) == 0


def test_poisson_bracket_one_particle_generators(rng):
    gamma = random_density_hierarchy(rng, 3, 2, 0.5)
    a, b = skew(rng, 1), skew(rng, 1)
    ctx = FiniteN(3)
    F = trace_functional(ObservableHierarchy({1: a}, ctx))
    G = trace_functional(ObservableHierarchy({1: b}, ctx))
    comm = a.data @ b.data - b.data @ a.data
    expected = (1j * 0.5 * np.trace(comm @ gamma[1].data)).real
    assert poisson_bracket(F, G, gamma, ctx) == pytest.approx(expected, abs=1e-13)


@pytest.mark.parametrize("ctx", [FiniteN(3), Infinite()])
def test_poisson_leibniz_and_antisymmetry(rng, ctx):
    gamma = random_density_hierarchy(rng, 5, 2)
    F, G, H = (random_functional(rng, 2, (1, 2), ctx, degree=1) for _ in range(3))
    pb = lambda X, Y: poisson_bracket(X, Y, gamma, ctx)  # noqa: E731
    leibniz = pb(F, G * H) - (pb(F, G) * H(gamma) + G(gamma) * pb(F, H))
    assert abs(leibniz) < 1e-9
    assert abs(pb(F, G) + pb(G, F)) < 1e-12


@pytest.mark.parametrize("ctx", [FiniteN(3), Infinite()])
def test_poisson_jacobi_on_linear_functionals(rng, ctx):
    """For trace functionals the bracket {F_A, F_B} is the trace functional of [A, B]."""
    gamma = random_density_hierarchy(rng, 5, 2)
    A, B, C = (hierarchy(rng, (1, 2), ctx) for _ in range(3))
    F = lambda X: trace_functional(X)  # noqa: E731
    pb = lambda X, Y: poisson_bracket(X, Y, gamma, ctx)  # noqa: E731
    assert pb(F(A), F(B)) == pytest.approx(F(lie_bracket(A, B, ctx))(gamma), abs=1e-12)
    total = (
        pb(F(A), F(lie_bracket(B, C, ctx)))
        + pb(F(B), F(lie_bracket(C, A, ctx)))
        + pb(F(C), F(lie_bracket(A, B, ctx)))
    )
    assert abs(total) < 1e-9


@pytest.mark.parametrize("ctx", [FiniteN(3), Infinite()])
def test_mass_is_casimir(rng, ctx):
    gamma = random_density_hierarchy(rng, 5, 2, 0.7)
    mass = trace_functional(ObservableHierarchy({1: -1j * identity(1, 2)}, ctx))
    assert mass(gamma) == pytest.approx(0.7 * np.trace(gamma[1].data).real)
    for support in [(1,), (2,), (1, 2), (3,)]:
        G = trace_functional(hierarchy(rng, support, ctx))
        assert abs(poisson_bracket(mass, G, gamma, ctx)) < 1e-11


def test_pairing_is_nondegenerate_on_bosonic_densities(rng):
    # real basis of self-adjoint, permutation-invariant two-particle kernels for d = 2
    basis = []
    for i in range(4):
        for j in range(4):
            for unit in (1, 1j):
                E = np.zeros((4, 4), dtype=complex)
                E[i, j] += unit
                E[j, i] += np.conj(unit)
                basis.append(sym_op(KOperator(2, 2, E)).data)
    vecs = np.array([np.concatenate([b.real.ravel(), b.imag.ravel()]) for b in basis])
    dim = np.linalg.matrix_rank(vecs, tol=1e-10)
    assert dim == 10  # Hermitian blocks on the symmetric (3x3) and antisymmetric (1x1) subspaces
    generators = [skew(rng, 2) for _ in range(30)]
    pairing = np.array([[(1j * trace_pair(A, KOperator(2, 2, b))).real for b in basis] for A in generators])
    assert np.linalg.matrix_rank(pairing, tol=1e-10) == dim


# -- vector fields ------------------------------------------------------------------------------
def test_vector_field_of_constant_is_zero(rng):
    gamma = random_density_hierarchy(rng, 3, 2)
    assert vector_field_N(constant(1.0, FiniteN(3)), gamma, 3).norm_max() == 0
    assert vector_field_inf(constant(1.0), gamma).norm_max() == 0


@pytest.mark.parametrize("N", [2, 3])
def test_vector_field_duality_finite(rng, N):
    ctx = FiniteN(N)
    worst = 0.0
    for _ in range(20):
        gamma = random_density_hierarchy(rng, N, 2, 0.5)
        F = random_functional(rng, 2, range(1, N + 1), ctx)
        H = random_functional(rng, 2, range(1, N + 1), ctx)
        X = vector_field_N(H, gamma, N)
        lhs = dot_trace(F.derivative(gamma), X)
        worst = max(worst, abs(lhs - poisson_bracket(F, H, gamma, ctx)))
    assert worst < 1e-9


def test_vector_field_duality_infinite(rng):
    worst = 0.0
    for _ in range(20):
        gamma = random_density_hierarchy(rng, 4, 2)
        F = random_functional(rng, 2, (1, 2))
        H = random_functional(rng, 2, (1, 2))
        X = vector_field_inf(H, gamma, levels=(1, 2))
        lhs = dot_trace(F.derivative(gamma), X)
        worst = max(worst, abs(lhs - poisson_bracket(F, H, gamma, Infinite())))
    assert worst < 1e-9


def test_vector_field_output_self_adjoint(rng):
    gamma = random_density_hierarchy(rng, 3, 2)
    H = random_functional(rng, 2, (1, 2), FiniteN(3))
    X = vector_field_N(H, gamma, 3)
    DensityHierarchy(X.entries, gamma.weights, validate=True, tol=1e-10)


def test_vector_field_inf_one_particle_generator(rng):
    a = skew(rng, 1)
    gamma = random_density_hierarchy(rng, 3, 2)
    X = vector_field_inf(trace_functional(ObservableHierarchy({1: a})), gamma)
    for ell in (1, 2, 3):
        S = sum(oracles.extend(a.data, (m,), ell, 2) for m in range(1, ell + 1))
        g = gamma[ell].data
        assert np.allclose(X[ell].data, S @ g - g @ S)


def test_vector_field_inf_depth_error(rng):
    gamma = random_density_hierarchy(rng, 2, 2)
    H = trace_functional(hierarchy(rng, (2,), Infinite()))
    with pytest.raises(HierarchyDepthError, match="hierarchy depth exhausted"):
        vector_field_inf(H, gamma)
    assert vector_field_inf(H, gamma, levels=(1,)).support == (1,)


def test_vector_field_N_needs_all_levels(rng):
    gamma = random_density_hierarchy(rng, 2, 2)
    with pytest.raises(HierarchyDepthError):
        vector_field_N(constant(0.0, FiniteN(3)), gamma, 3)


def test_vector_field_operator_algebra(rng):
    psi = random_self_adjoint_bosonic(rng, 2, 2)
    gamma = DensityHierarchy({2: psi})
    A = skew(rng, 2)
    H = trace_functional(ObservableHierarchy({2: A}, OperatorAlgebra(2)))
    X = vector_field(H, gamma, OperatorAlgebra(2))
    assert np.allclose(X[2].data, 2 * (A.data @ psi.data - psi.data @ A.data))


# -- properties -------------------------------------------------------------------------------
@given(seed=seeds, N=st.integers(2, 5))
def test_bracket_bilinear_antisymmetric_property(seed, N):
    rng = np.random.default_rng(seed)
    ctx = FiniteN(N)
    A, B, C = (hierarchy(rng, (1, 2), ctx) for _ in range(3))
    s = float(rng.standard_normal())
    assert residual_h(bracket_N(A, B, N), -1.0 * bracket_N(B, A, N)) < 1e-12
    lhs = bracket_N(s * A + C, B, N)
    rhs = s * bracket_N(A, B, N) + bracket_N(C, B, N)
    assert residual_h(lhs, rhs) < 1e-11


@given(seed=seeds)
def test_bracket_inf_antisymmetric_property(seed):
    rng = np.random.default_rng(seed)
    A, B = hierarchy(rng, (1, 2), Infinite()), hierarchy(rng, (1, 2), Infinite())
    assert residual_h(bracket_inf(A, B), -1.0 * bracket_inf(B, A)) < 1e-12


def residual_h(X, Y):
    return X.distance(Y)
