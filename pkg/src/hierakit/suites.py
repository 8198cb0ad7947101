"""Verification suites behind the ``hierakit`` commands.

Each command is a list of named check groups.  A group is a function
``(config, rng) -> (checks, csv_rows)``; its random generator is derived from
the seed and the group name, so results do not depend on which other groups
run or on whether groups run in parallel.
"""

from __future__ import annotations

import warnings
import zlib
from contextlib import contextmanager
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from . import coefficients as coef
from .config import ExperimentConfig
from .flows import (
    FlowConfig,
    HermitianPropagator,
    gp_residual_series,
    propagate_schrodinger,
    propagate_von_neumann,
    rk4_hierarchy,
    splitstep_nls,
)
from .functional_algebra import (
    PolynomialFunctional,
    check_gateaux,
    check_symplectic_gradient,
    iota_dm_hierarchy,
    omega,
    symplectic_gradient_dm,
    symplectic_gradient_pullback,
    trace_functional,
)
from .grid import GridSpec, WaveFunction
from .hierarchy_algebra import (
    Context,
    DensityHierarchy,
    FiniteN,
    Infinite,
    ObservableHierarchy,
    OperatorAlgebra,
    bracket_inf,
    bracket_N,
    dot_trace,
    iota_epsilon,
    lie_bracket,
    poisson_bracket,
    vector_field_inf,
    vector_field_N,
)
from .instances import (
    random_bosonic_wave,
    random_density,
    random_density_hierarchy,
    random_functional,
    random_observable_hierarchy,
    random_skew_bosonic,
    random_wave,
)
from .models_1d import (
    ModelParams,
    bbgky_rhs,
    delta_pairing_gap,
    gp_rhs,
    h_bbgky,
    h_gp,
    h_nls,
    hamiltonian_N,
    iota_dm,
    iota_fact,
    iota_rdm,
    nls_rhs,
)
from .report import Check, Observation, Report, check_below, check_between
from .tensor_core import KOperator

__all__ = [
    "CSV_COLUMNS",
    "GROUPS",
    "run_command",
    "group_rng",
    "fit_slope",
    "worked_coefficient_deviation",
    "smooth_initial_state",
]

CSV_COLUMNS: dict[str, tuple[str, ...]] = {
    "converge-bracket": ("N", "k", "norm_diff"),
    "commuting-diagram": ("t", "k", "diff_norm"),
    "nls-gp": ("t", "mass_drift", "energy_drift", "gp_residual"),
}

GroupResult = tuple[list[Check | Observation], list[tuple]]
Group = Callable[[ExperimentConfig, np.random.Generator], GroupResult]


def group_rng(seed: int, name: str) -> np.random.Generator:
    """Generator for one check group, keyed by the seed and the group's name."""
    return np.random.default_rng(np.random.SeedSequence([seed, zlib.crc32(name.encode())]))


def fit_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    lx, ly = np.log(np.asarray(x, dtype=float)), np.log(np.asarray(y, dtype=float))
    return float(np.polyfit(lx, ly, 1)[0])


@contextmanager
def _quiet():
    """Silence the under-resolved interaction warning on the deliberately tiny test grids."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        yield


def _rel(a: float, b: float, floor: float = 1e-12) -> float:
    return abs(a - b) / max(abs(a), abs(b), floor)


def _supports(K: int) -> tuple[int, ...]:
    return tuple(range(1, K + 1))


# -- coefficient algebra ------------------------------------------------------------
def worked_coefficient_deviation(N: int) -> float:
    """Largest deviation of the primed coefficients from their closed forms at ``N``.

    Closed forms: ``c'(l,1,1) = 1``, ``c'(1,2,1) = 2``,
    ``c'(l,2,1) = 2(N-l)/(N-1)`` and ``c'(l,2,2) = 1/(N-1)`` for
    ``2 <= l <= N-1``, ``c'(N,2,2) = 1/(N-1)``.  Computed exactly.
    """
    worst = Fraction(0)
    if N < 2:
        return float(abs(coef.primed_coefficient(1, 1, 1, N) - 1))
    expected: list[tuple[Fraction, Fraction]] = []
    for ell in range(1, N + 1):
        expected.append((coef.primed_coefficient(ell, 1, 1, N), Fraction(1)))
    expected.append((coef.primed_coefficient(1, 2, 1, N), Fraction(2)))
    for ell in range(2, N):
        expected.append((coef.primed_coefficient(ell, 2, 1, N), Fraction(2 * (N - ell), N - 1)))
        expected.append((coef.primed_coefficient(ell, 2, 2, N), Fraction(1, N - 1)))
    expected.append((coef.primed_coefficient(N, 2, 2, N), Fraction(1, N - 1)))
    for got, want in expected:
        worst = max(worst, abs(got - want))
    return float(worst)


def _group_coefficients(cfg: ExperimentConfig, rng: np.random.Generator) -> GroupResult:
    Ns = sorted(set(cfg.model.N) | {2, 3})
    checks = [
        check_below(f"worked coefficients [N={N}]", worked_coefficient_deviation(N), cfg.tol("coefficients"), "coefficients")
        for N in Ns
    ]
    return checks, []


# -- Lie algebra ------------------------------------------------------------------------
def _algebra_contexts(cfg: ExperimentConfig) -> list[tuple[str, Context]]:
    return [(f"N={N}", FiniteN(N)) for N in cfg.model.N] + [("inf", Infinite())]


def _random_triple(rng, cfg: ExperimentConfig, ctx: Context, amplitude: float = 1.0):
    d = cfg.model.n0
    K = cfg.model.K
    if isinstance(ctx, FiniteN):
        K = min(K, ctx.N)
    return [amplitude * random_observable_hierarchy(rng, _supports(K), d, ctx) for _ in range(3)]


def _group_antisymmetry(cfg: ExperimentConfig, rng: np.random.Generator, amplitude: float = 1.0) -> GroupResult:
    checks = []
    for label, ctx in _algebra_contexts(cfg):
        worst = 0.0
        for _ in range(cfg.instances):
            A, B, _ = _random_triple(rng, cfg, ctx, amplitude)
            worst = max(worst, (lie_bracket(A, B, ctx) + lie_bracket(B, A, ctx)).norm_max())
        checks.append(check_below(f"antisymmetry [{label}]", worst, cfg.tol("algebra"), "antisymmetry"))
    return checks, []


def _group_jacobi(cfg: ExperimentConfig, rng: np.random.Generator, amplitude: float = 1.0) -> GroupResult:
    checks = []
    for label, ctx in _algebra_contexts(cfg):
        worst = 0.0
        for _ in range(cfg.instances):
            A, B, C = _random_triple(rng, cfg, ctx, amplitude)
            br = lambda x, y: lie_bracket(x, y, ctx)  # noqa: E731
            jac = br(A, br(B, C)) + br(B, br(C, A)) + br(C, br(A, B))
            worst = max(worst, jac.norm_max())
        checks.append(check_below(f"jacobi [{label}]", worst, cfg.tol("algebra"), "jacobi"))
    return checks, []


def homomorphism_residual(A: ObservableHierarchy, B: ObservableHierarchy, N: int, dim: int) -> float:
    """``|iota_eps([A, B]_N) - N [iota_eps(A), iota_eps(B)]|`` in max-norm."""
    lhs = iota_epsilon(bracket_N(A, B, N), N, dim)
    ia, ib = iota_epsilon(A, N, dim), iota_epsilon(B, N, dim)
    return (lhs - N * ia.commutator(ib)).norm_max()


def _group_homomorphism(cfg: ExperimentConfig, rng: np.random.Generator, amplitude: float = 1.0) -> GroupResult:
    d = cfg.model.n0
    checks = []
    for N in cfg.model.N:
        # small N: use the full support so that truncated products (l + j - 1 > N) occur
        K = N if N <= 3 else min(cfg.model.K, N)
        worst = 0.0
        for _ in range(cfg.instances):
            A = amplitude * random_observable_hierarchy(rng, _supports(K), d, FiniteN(N))
            B = amplitude * random_observable_hierarchy(rng, _supports(K), d, FiniteN(N))
            worst = max(worst, homomorphism_residual(A, B, N, d))
        checks.append(check_below(f"homomorphism [N={N}]", worst, cfg.tol("homomorphism"), "homomorphism"))
    return checks, []


def _functional_contexts(cfg: ExperimentConfig) -> list[tuple[str, Context, int]]:
    N = max(cfg.model.N)
    K = cfg.model.K
    return [(f"N={N}", FiniteN(N), N), ("inf", Infinite(), 2 * K + 1)]


def _group_leibniz(cfg: ExperimentConfig, rng: np.random.Generator) -> GroupResult:
    d = cfg.model.n0
    checks = []
    for label, ctx, depth in _functional_contexts(cfg):
        K = min(cfg.model.K, depth)
        worst = 0.0
        for _ in range(cfg.instances):
            F, G, H = (random_functional(rng, d, _supports(K), ctx) for _ in range(3))
            gamma = random_density_hierarchy(rng, depth, d)
            lhs = poisson_bracket(F, G * H, gamma, ctx)
            rhs = poisson_bracket(F, G, gamma, ctx) * H(gamma) + G(gamma) * poisson_bracket(F, H, gamma, ctx)
            worst = max(worst, _rel(lhs, rhs))
        checks.append(check_below(f"leibniz [{label}]", worst, cfg.tol("leibniz"), "leibniz"))
    return checks, []


def mass_casimir(dim: int, context: Context) -> PolynomialFunctional:
    """``Gamma -> Tr gamma^(1)``, generated by ``-i`` times the one-particle identity."""
    gen = ObservableHierarchy({1: KOperator(1, dim, -1j * np.eye(dim))}, context)
    return trace_functional(gen)


def _group_casimir(cfg: ExperimentConfig, rng: np.random.Generator) -> GroupResult:
    d = cfg.model.n0
    checks = []
    for label, ctx, depth in _functional_contexts(cfg):
        K = min(cfg.model.K, depth)
        C = mass_casimir(d, ctx)
        worst = 0.0
        for _ in range(cfg.instances):
            G = random_functional(rng, d, _supports(K), ctx)
            gamma = random_density_hierarchy(rng, depth, d)
            worst = max(worst, abs(poisson_bracket(C, G, gamma, ctx)))
        checks.append(check_below(f"casimir Tr(gamma1) [{label}]", worst, cfg.tol("casimir"), "casimir"))
    return checks, []


# -- gradients ------------------------------------------------------------------------------
def _directions_density(rng, depth: int, dim: int, h: float, count: int) -> list[DensityHierarchy]:
    return [random_density_hierarchy(rng, depth, dim, h) for _ in range(count)]


def gradient_checks(cfg: ExperimentConfig, rng: np.random.Generator, count: int = 10) -> list[Check]:
    """Analytic derivatives against central differences along ``count`` random directions."""
    tol = cfg.tol("gradient")
    d = cfg.model.n0
    out = []

    def add(name: str, report) -> None:
        out.append(check_below(f"gradient {name}", report.max_relative_deviation, tol, "gradient"))

    # Gateaux derivatives of polynomial functionals
    gamma = random_density_hierarchy(rng, 3, d)
    F1 = trace_functional(random_observable_hierarchy(rng, (1, 2), d))
    add("linear [inf]", check_gateaux(F1, gamma, _directions_density(rng, 3, d, 1.0, count)))
    F2 = random_functional(rng, d, (1, 2, 3), FiniteN(3), degree=2)
    add("quadratic [N=3]", check_gateaux(F2, gamma, _directions_density(rng, 3, d, 1.0, count)))
    F3 = random_functional(rng, d, (1, 2), Infinite(), degree=3)
    add("cubic [inf]", check_gateaux(F3, gamma, _directions_density(rng, 3, d, 1.0, count)))

    # model Hamiltonians on a small grid
    grid = GridSpec(4)
    with _quiet():
        params = ModelParams(grid, N=2, kappa=cfg.model.kappa, beta=cfg.model.beta, width=grid.L / 2)
    gamma_grid = random_density_hierarchy(rng, 2, grid.n, grid.h)
    add(
        "H_BBGKY",
        check_gateaux(h_bbgky(params), gamma_grid, _directions_density(rng, 2, grid.n, grid.h, count)),
    )

    # symplectic gradients on wave functions
    grid = GridSpec(8)
    phi = random_wave(rng, grid)
    dirs = [random_wave(rng, grid) for _ in range(count)]
    add("H_NLS", check_symplectic_gradient(lambda p: h_nls(p, cfg.model.kappa), nls_rhs(phi, cfg.model.kappa), phi, dirs))
    G = random_functional(rng, grid.n, (1, 2))
    K = max(G.depth, 1)
    add(
        "pullback along factorization",
        check_symplectic_gradient(lambda p: G(iota_fact(p, K)), symplectic_gradient_pullback(G, phi), phi, dirs),
    )
    grid = GridSpec(3, 2.0)
    N = 2
    ctx = OperatorAlgebra(N)
    gens = [ObservableHierarchy({N: random_skew_bosonic(rng, N, grid.n)}, ctx) for _ in range(2)]
    H = trace_functional(gens[0]) * trace_functional(gens[1]) + trace_functional(gens[1])
    Phi = random_bosonic_wave(rng, grid, N)
    dirs_n = [random_bosonic_wave(rng, grid, N) for _ in range(count)]
    add(
        "pullback along density-matrix map",
        check_symplectic_gradient(lambda p: H(iota_dm_hierarchy(p)), symplectic_gradient_dm(H, Phi), Phi, dirs_n),
    )
    return out


def _group_gradient(cfg: ExperimentConfig, rng: np.random.Generator) -> GroupResult:
    return gradient_checks(cfg, rng), []


# -- bracket convergence -------------------------------------------------------------------
def bracket_differences(A: ObservableHierarchy, B: ObservableHierarchy, N: int) -> dict[int, float]:
    """Per-level max-norm of ``[A, B]_N - [A, B]_inf``."""
    fin = bracket_N(A.with_context(FiniteN(N)), B.with_context(FiniteN(N)), N)
    inf = bracket_inf(A, B)
    levels = sorted(set(fin.keys()) | set(inf.keys()))
    out = {}
    for k in levels:
        a, b = fin.get(k), inf.get(k)
        if a is None:
            out[k] = b.norm_max()
        elif b is None:
            out[k] = a.norm_max()
        else:
            out[k] = (a - b).norm_max()
    return out


def _group_convergence(cfg: ExperimentConfig, rng: np.random.Generator) -> GroupResult:
    d = cfg.model.n0
    K = cfg.model.K
    Ns = sorted(cfg.model.N)
    if K > min(Ns):
        raise ValueError("observable support K must not exceed the smallest N in the sweep")
    pairs = [
        (random_observable_hierarchy(rng, _supports(K), d), random_observable_hierarchy(rng, _supports(K), d))
        for _ in range(cfg.instances)
    ]
    rows, totals = [], []
    for N in Ns:
        per_level: dict[int, float] = {}
        for A, B in pairs:
            for k, v in bracket_differences(A, B, N).items():
                per_level[k] = max(per_level.get(k, 0.0), v)
        rows.extend((N, k, per_level[k]) for k in sorted(per_level))
        totals.append(max(per_level.values(), default=0.0))
    checks = []
    if max(totals) == 0.0:
        checks.append(check_below("bracket difference vanishes identically", 0.0, cfg.tol("algebra"), "convergence"))
    elif len(Ns) >= 2:
        slope = fit_slope(Ns, totals)
        checks.append(
            check_between(
                "bracket convergence slope",
                slope,
                cfg.tol("slope_min"),
                cfg.tol("slope_max"),
                "convergence",
                detail="N=" + ",".join(map(str, Ns)),
            )
        )
    return checks, rows


# -- flow equivalence -----------------------------------------------------------------------
def _model(cfg: ExperimentConfig, n: int, N: int) -> ModelParams:
    grid = GridSpec(n, cfg.model.L)
    return ModelParams(grid, N=N, kappa=cfg.model.kappa, beta=cfg.model.beta, K=cfg.model.K)


def consistent_density(rng: np.random.Generator, grid: GridSpec, N: int) -> DensityHierarchy:
    """Reduced density matrices of a random bosonic N-particle density matrix."""
    Psi = random_density(rng, N, grid.n, grid.weights)
    return iota_rdm(Psi, N, grid)


def _group_flow_coefficients(cfg: ExperimentConfig, rng: np.random.Generator) -> GroupResult:
    checks = []
    for N in sorted(set(cfg.model.N)):
        checks.append(
            check_below(f"worked coefficients [N={N}]", worked_coefficient_deviation(N), cfg.tol("coefficients"), "coefficients")
        )
        if N >= 2:
            # the pair-interaction weight 2/(N-1): c'(l,2,2) = 1/(N-1) doubled by evenness of V
            dev = abs(2 * coef.primed_coefficient(N, 2, 2, N) - Fraction(2, N - 1))
            checks.append(check_below(f"pair weight 2/(N-1) [N={N}]", float(dev), cfg.tol("coefficients"), "coefficients"))
    return checks, []


def _group_bbgky(cfg: ExperimentConfig, rng: np.random.Generator) -> GroupResult:
    checks = []
    for N in cfg.model.N:
        for n in cfg.model.n:
            with _quiet():
                params = _model(cfg, n, N)
                H = h_bbgky(params)
                worst = 0.0
                for _ in range(cfg.instances):
                    gamma = consistent_density(rng, params.grid, N)
                    diff = vector_field_N(H, gamma, N) - bbgky_rhs(gamma, params)
                    worst = max(worst, diff.norm_max())
            checks.append(check_below(f"BBGKY vector field [N={N}, n={n}]", worst, cfg.tol("flow_equivalence"), "bbgky"))
    return checks, []


def _group_gp(cfg: ExperimentConfig, rng: np.random.Generator) -> GroupResult:
    K = cfg.model.K
    checks = []
    for n in cfg.model.n:
        grid = GridSpec(n, cfg.model.L)
        H = h_gp(grid, cfg.model.kappa)
        worst = 0.0
        for _ in range(cfg.instances):
            gamma = random_density_hierarchy(rng, K + 1, n, grid.h)
            diff = vector_field_inf(H, gamma, levels=range(1, K + 1)) - gp_rhs(gamma, grid, cfg.model.kappa, K=K)
            worst = max(worst, diff.norm_max())
        checks.append(check_below(f"GP vector field [K={K}, n={n}]", worst, cfg.tol("flow_equivalence"), "gp"))
    return checks, []


DELTA_LIMIT_POINTS = 128
DELTA_LIMIT_N = (4, 16, 64, 256)


def _group_delta_limit(cfg: ExperimentConfig, rng: np.random.Generator) -> GroupResult:
    """Report how far the V_N pairing is from the delta pairing as N grows; no rate is asserted."""
    grid = GridSpec(DELTA_LIMIT_POINTS, cfg.model.L)
    modes = np.arange(-3, 4)
    coeffs = rng.standard_normal(modes.size) + 1j * rng.standard_normal(modes.size)
    phi = WaveFunction(np.exp(2j * np.pi * np.outer(grid.x, modes) / grid.L) @ coeffs, grid)
    phi = (1 / np.sqrt(phi.norm2())) * phi
    gaps = []
    with _quiet():
        for N in DELTA_LIMIT_N:
            gaps.append(delta_pairing_gap(phi, ModelParams(grid, N=N, beta=cfg.model.beta)))
    out: list[Check | Observation] = [
        Observation(f"V_N vs delta pairing gap [N={N}, n={grid.n}]", gap, "delta-limit") for N, gap in zip(DELTA_LIMIT_N, gaps)
    ]
    if min(gaps) > 0:
        out.append(Observation("V_N vs delta pairing gap log-log slope", fit_slope(np.array(DELTA_LIMIT_N), np.array(gaps)), "delta-limit"))
    return out, []


def _group_flow_zero(cfg: ExperimentConfig, rng: np.random.Generator) -> GroupResult:
    N, n, K = cfg.model.N[0], cfg.model.n[0], cfg.model.K
    with _quiet():
        params = _model(cfg, n, N)
        zero = DensityHierarchy({k: KOperator.zeros(k, n) for k in range(1, N + 1)}, params.grid.weights)
        value = max(vector_field_N(h_bbgky(params), zero, N).norm_max(), bbgky_rhs(zero, params).norm_max())
    zero_gp = DensityHierarchy({k: KOperator.zeros(k, n) for k in range(1, K + 2)}, params.grid.weights)
    value_gp = max(
        vector_field_inf(h_gp(params.grid, cfg.model.kappa), zero_gp, levels=range(1, K + 1)).norm_max(),
        gp_rhs(zero_gp, params.grid, cfg.model.kappa, K=K).norm_max(),
    )
    return [
        check_below("zero hierarchy [BBGKY]", value, cfg.tol("flow_equivalence"), "zero"),
        check_below("zero hierarchy [GP]", value_gp, cfg.tol("flow_equivalence"), "zero"),
    ], []


# -- Poisson morphisms -----------------------------------------------------------------------
def _operator_functional(rng, N: int, dim: int) -> PolynomialFunctional:
    ctx = OperatorAlgebra(N)
    gens = [ObservableHierarchy({N: random_skew_bosonic(rng, N, dim)}, ctx) for _ in range(3)]
    return trace_functional(gens[0]) + trace_functional(gens[1]) * trace_functional(gens[2])


def density_matrix_morphism_gap(F: PolynomialFunctional, G: PolynomialFunctional, Phi: WaveFunction) -> tuple[float, float]:
    """``(N omega(grad f, grad g), {F, G}(|Phi><Phi|))`` for N-particle functionals."""
    N = Phi.k
    lhs = N * omega(symplectic_gradient_dm(F, Phi), symplectic_gradient_dm(G, Phi))
    rhs = poisson_bracket(F, G, iota_dm_hierarchy(Phi), F.context)
    return lhs, rhs


def factorization_morphism_gap(F: PolynomialFunctional, G: PolynomialFunctional, phi: WaveFunction) -> tuple[float, float]:
    """``(omega(grad(F o iota), grad(G o iota)), {F, G}(iota(phi)))``."""
    lhs = omega(symplectic_gradient_pullback(F, phi), symplectic_gradient_pullback(G, phi))
    depth = 2 * max(F.depth, G.depth, 1)
    rhs = poisson_bracket(F, G, iota_fact(phi, depth), Infinite())
    return lhs, rhs


def _group_density_matrix(cfg: ExperimentConfig, rng: np.random.Generator) -> GroupResult:
    N, n = cfg.model.N[0], cfg.model.n[0]
    grid = GridSpec(n, cfg.model.L)
    worst = 0.0
    for _ in range(cfg.instances):
        F, G = _operator_functional(rng, N, n), _operator_functional(rng, N, n)
        Phi = random_bosonic_wave(rng, grid, N)
        worst = max(worst, _rel(*density_matrix_morphism_gap(F, G, Phi)))
    return [check_below(f"density-matrix map is Poisson [N={N}, n={n}]", worst, cfg.tol("morphism"), "density-matrix")], []


def _group_reduced_density(cfg: ExperimentConfig, rng: np.random.Generator) -> GroupResult:
    N, n = cfg.model.N[0], cfg.model.n[0]
    grid = GridSpec(n, cfg.model.L)
    K = min(cfg.model.K, N)
    dual, poisson = 0.0, 0.0
    for _ in range(cfg.instances):
        Psi = random_density(rng, N, n, grid.weights)
        gamma = iota_rdm(Psi, N, grid)
        psi_h = DensityHierarchy({N: Psi}, grid.weights, validate=False)
        A = random_observable_hierarchy(rng, _supports(N), n, FiniteN(N))
        lifted = ObservableHierarchy({N: iota_epsilon(A, N, n)}, OperatorAlgebra(N))
        dual = max(dual, _rel(dot_trace(lifted, psi_h), dot_trace(A, gamma)))
        F = random_functional(rng, n, _supports(K), FiniteN(N))
        G = random_functional(rng, n, _supports(K), FiniteN(N))
        lhs = poisson_bracket(F.pullback_rdm(N, n), G.pullback_rdm(N, n), psi_h, OperatorAlgebra(N))
        rhs = poisson_bracket(F, G, gamma, FiniteN(N))
        poisson = max(poisson, _rel(lhs, rhs))
    return [
        check_below(f"reduced-density duality [N={N}, n={n}]", dual, cfg.tol("morphism"), "reduced-density"),
        check_below(f"reduced-density map is Poisson [N={N}, n={n}]", poisson, cfg.tol("morphism"), "reduced-density"),
    ], []


def _group_factorization(cfg: ExperimentConfig, rng: np.random.Generator) -> GroupResult:
    n = cfg.model.n[0]
    grid = GridSpec(n, cfg.model.L)
    K = min(cfg.model.K, 2)
    worst = 0.0
    for _ in range(cfg.instances):
        F = random_functional(rng, n, _supports(K))
        G = random_functional(rng, n, _supports(K))
        phi = random_wave(rng, grid)
        worst = max(worst, _rel(*factorization_morphism_gap(F, G, phi)))
    return [check_below(f"factorization map is Poisson [n={n}]", worst, cfg.tol("morphism"), "factorization")], []


PULLBACK_POINTS = 64


def pullback_residual(phi: WaveFunction, kappa: float, gp_energy: PolynomialFunctional | None = None) -> float:
    """Relative gap ``|H_GP(iota(phi)) - H_NLS(phi)| / max(1, |H_NLS(phi)|)``.

    ``gp_energy`` may carry a prebuilt ``h_gp(phi.grid, kappa)`` to share across calls."""
    H = h_gp(phi.grid, kappa) if gp_energy is None else gp_energy
    a = H(iota_fact(phi, 2))
    b = h_nls(phi, kappa)
    return abs(a - b) / max(1.0, abs(b))


def _group_pullback(cfg: ExperimentConfig, rng: np.random.Generator) -> GroupResult:
    grid = GridSpec(PULLBACK_POINTS, cfg.model.L)
    H = h_gp(grid, cfg.model.kappa)
    worst = max(pullback_residual(random_wave(rng, grid), cfg.model.kappa, H) for _ in range(cfg.instances))
    return [check_below(f"pullback H_GP o iota = H_NLS [n={grid.n}]", worst, cfg.tol("pullback"), "pullback")], []


def _group_morphism_zero(cfg: ExperimentConfig, rng: np.random.Generator) -> GroupResult:
    n = cfg.model.n[0]
    grid = GridSpec(n, cfg.model.L)
    zero = WaveFunction(np.zeros(n), grid)
    F, G = random_functional(rng, n, (1, 2)), random_functional(rng, n, (1, 2))
    lhs, rhs = factorization_morphism_gap(F, G, zero)
    big = GridSpec(PULLBACK_POINTS, cfg.model.L)
    zero_big = WaveFunction(np.zeros(big.n), big)
    value = max(abs(lhs), abs(rhs), abs(h_nls(zero_big, cfg.model.kappa)), abs(h_gp(big, cfg.model.kappa)(iota_fact(zero_big, 2))))
    return [check_below("zero state [factorization, pullback]", value, cfg.tol("pullback"), "zero")], []


# -- commuting diagram -------------------------------------------------------------------------
def diagram_rows(
    params: ModelParams, Psi0: KOperator, flow: FlowConfig
) -> tuple[list[tuple[float, int, float]], float, float]:
    """Per-snapshot gaps between the BBGKY RK4 flow and the exact N-body flow.

    Returns ``(rows, sup_gap, max_hermitization_correction)``.
    """
    N, grid = params.N, params.grid
    prop = HermitianPropagator(hamiltonian_N(params))
    traj = rk4_hierarchy(lambda g: bbgky_rhs(g, params), iota_rdm(Psi0, N, grid), flow)
    rows, worst = [], 0.0
    for t, state in zip(traj.times, traj.states):
        exact = iota_rdm(propagate_von_neumann(Psi0, prop, t), N, grid)
        for k in range(1, N + 1):
            gap = (state[k] - exact[k]).norm_max()
            rows.append((round(t, 12), k, gap))
            worst = max(worst, gap)
    return rows, worst, max(traj.corrections, default=0.0)


def rk4_order(params: ModelParams, Psi0: KOperator, T: float, dts: Sequence[float]) -> tuple[float, list[float]]:
    """Fitted order of the BBGKY RK4 error at time ``T`` over the step sizes ``dts``."""
    N, grid = params.N, params.grid
    exact = iota_rdm(propagate_von_neumann(Psi0, hamiltonian_N(params), T), N, grid)
    errors = []
    for dt in dts:
        traj = rk4_hierarchy(lambda g: bbgky_rhs(g, params), iota_rdm(Psi0, N, grid), FlowConfig(dt, T, record_every=10**9))
        errors.append((traj.final - exact).norm_max())
    return fit_slope(dts, errors), errors


def _diagram_setup(cfg: ExperimentConfig, rng: np.random.Generator):
    with _quiet():
        params = _model(cfg, cfg.model.n[0], cfg.model.N[0])
    Psi0 = random_density(rng, params.N, params.grid.n, params.grid.weights)
    return params, Psi0


def _group_unitarity(cfg: ExperimentConfig, rng: np.random.Generator) -> GroupResult:
    params, Psi0 = _diagram_setup(cfg, rng)
    T = cfg.flow.T
    prop = HermitianPropagator(hamiltonian_N(params))
    Phi = random_bosonic_wave(rng, params.grid, params.N)
    Phi_t = propagate_schrodinger(Phi, prop, T)
    norm_gap = abs(Phi_t.norm2() - Phi.norm2())
    w = params.grid.h**params.N
    Psi_t = propagate_von_neumann(Psi0, prop, T)
    trace_gap = abs(w * np.trace(Psi_t.data).real - w * np.trace(Psi0.data).real)
    consistency = (iota_dm(Phi_t) - propagate_von_neumann(iota_dm(Phi), prop, T)).norm_max()
    tol = cfg.tol("unitarity")
    return [
        check_below("Schrödinger flow preserves the norm", norm_gap, tol, "unitarity"),
        check_below("von Neumann flow preserves the trace", trace_gap, tol, "unitarity"),
        check_below("density-matrix map intertwines the flows", consistency, tol, "unitarity"),
    ], []


def _group_diagram(cfg: ExperimentConfig, rng: np.random.Generator) -> GroupResult:
    params, Psi0 = _diagram_setup(cfg, rng)
    flow = FlowConfig(cfg.flow.dt, cfg.flow.T, "rk4", cfg.flow.record_every)
    rows, worst, corr = diagram_rows(params, Psi0, flow)
    label = f"N={params.N}, n={params.grid.n}, dt={flow.dt:g}, T={flow.T:g}"
    return [
        check_below(f"commuting diagram [{label}]", worst, cfg.tol("diagram"), "diagram"),
        check_below("re-hermitization correction per step", corr, cfg.tol("hermitization"), "diagram"),
    ], rows


def _group_order(cfg: ExperimentConfig, rng: np.random.Generator) -> GroupResult:
    params, Psi0 = _diagram_setup(cfg, rng)
    T = cfg.flow.T
    dts = [T / 10, T / 20, T / 40, T / 80]
    slope, _ = rk4_order(params, Psi0, T, dts)
    target, band = cfg.tol("rk4_order"), cfg.tol("order_band")
    return [check_between("RK4 order under step halving", slope, target - band, target + band, "order")], []


# -- NLS and factorized GP ---------------------------------------------------------------------------
def smooth_initial_state(rng: np.random.Generator, grid: GridSpec, modes: int = 2, amplitude: float = 0.5) -> WaveFunction:
    """Random trigonometric polynomial with ``|m| <= modes``, plus a unit offset, scaled by ``amplitude``."""
    x = grid.x
    v = np.ones(grid.n, dtype=complex)
    for m in range(-modes, modes + 1):
        if m == 0:
            continue
        c = (rng.standard_normal() + 1j * rng.standard_normal()) / (2 * abs(m))
        v += c * np.exp(2j * np.pi * m * x / grid.L)
    return WaveFunction(amplitude * v, grid)


def _nls_setup(cfg: ExperimentConfig, rng: np.random.Generator) -> tuple[WaveFunction, float]:
    grid = GridSpec(cfg.model.n[0], cfg.model.L)
    return smooth_initial_state(rng, grid), cfg.model.kappa


def _nls_config(cfg: ExperimentConfig, dt: float) -> FlowConfig:
    return FlowConfig(dt, cfg.flow.T, "strang-split", 1)


def _group_mass(cfg: ExperimentConfig, rng: np.random.Generator) -> GroupResult:
    phi0, kappa = _nls_setup(cfg, rng)
    traj = splitstep_nls(phi0, kappa, _nls_config(cfg, cfg.flow.dt))
    m0 = phi0.norm2()
    drift = max(abs(p.norm2() - m0) for p in traj.states)
    return [check_below("split-step mass conservation", drift, cfg.tol("mass"), "mass")], []


def _group_energy(cfg: ExperimentConfig, rng: np.random.Generator) -> GroupResult:
    phi0, kappa = _nls_setup(cfg, rng)
    dts = [cfg.flow.dt / 2**i for i in range(4)]
    e0 = h_nls(phi0, kappa)
    drifts = [abs(h_nls(splitstep_nls(phi0, kappa, _nls_config(cfg, dt)).final, kappa) - e0) for dt in dts]
    slope = fit_slope(dts, drifts)
    target, band = cfg.tol("energy_order"), cfg.tol("order_band")
    return [check_between("H_NLS drift order", slope, target - band, target + band, "energy")], []


def _group_gp_residual(cfg: ExperimentConfig, rng: np.random.Generator) -> GroupResult:
    phi0, kappa = _nls_setup(cfg, rng)
    K = cfg.model.K
    dts = [cfg.flow.dt / 2**i for i in range(3)]
    maxima, rows = [], []
    for i, dt in enumerate(dts):
        traj = splitstep_nls(phi0, kappa, _nls_config(cfg, dt))
        series = gp_residual_series(traj, K, kappa)
        maxima.append(float(np.nanmax(series)))
        if i == 0:
            m0, e0 = phi0.norm2(), h_nls(phi0, kappa)
            rows = [
                (round(t, 12), abs(p.norm2() - m0), abs(h_nls(p, kappa) - e0), float(r))
                for t, p, r in zip(traj.times, traj.states, series)
            ]
    slope = fit_slope(dts, maxima)
    target, band = cfg.tol("gp_order"), cfg.tol("order_band")
    return [
        check_between(f"GP residual of factorized NLS order [K={K}]", slope, target - band, target + band, "gp-residual")
    ], rows


GROUPS: dict[str, dict[str, Group]] = {
    "verify-algebra": {
        "coefficients": _group_coefficients,
        "antisymmetry": _group_antisymmetry,
        "jacobi": _group_jacobi,
        "homomorphism": _group_homomorphism,
        "leibniz": _group_leibniz,
        "casimir": _group_casimir,
        "gradient": _group_gradient,
    },
    "converge-bracket": {"convergence": _group_convergence},
    "flow-equivalence": {
        "coefficients": _group_flow_coefficients,
        "bbgky": _group_bbgky,
        "gp": _group_gp,
        "delta-limit": _group_delta_limit,
        "zero": _group_flow_zero,
    },
    "morphism": {
        "density-matrix": _group_density_matrix,
        "reduced-density": _group_reduced_density,
        "factorization": _group_factorization,
        "pullback": _group_pullback,
        "zero": _group_morphism_zero,
    },
    "commuting-diagram": {
        "unitarity": _group_unitarity,
        "diagram": _group_diagram,
        "order": _group_order,
    },
    "nls-gp": {
        "mass": _group_mass,
        "energy": _group_energy,
        "gp-residual": _group_gp_residual,
    },
}


@dataclass(frozen=True)
class CommandResult:
    report: Report
    csv_columns: tuple[str, ...] | None
    csv_rows: list[tuple]


def _run_group(cfg: ExperimentConfig, name: str) -> GroupResult:
    fn = GROUPS[cfg.command][name]
    try:
        return fn(cfg, group_rng(cfg.seed, name))
    except Exception as exc:  # a crashing group is reported as a failed check
        return [Check(f"{name} raised {type(exc).__name__}", float("nan"), 0.0, False, name, str(exc))], []


def run_command(cfg: ExperimentConfig, parallel: bool = False) -> CommandResult:
    """Run the selected groups of ``cfg.command`` and assemble a report in group order."""
    names = [g for g in GROUPS[cfg.command] if cfg.wants(g)]
    if parallel and len(names) > 1:
        with ThreadPoolExecutor(max_workers=len(names)) as pool:
            results = list(pool.map(lambda g: _run_group(cfg, g), names))
    else:
        results = [_run_group(cfg, g) for g in names]
    report = Report(cfg.command, cfg.seed, cfg.as_dict())
    rows: list[tuple] = []
    for checks, group_rows in results:
        report.extend(checks)
        rows.extend(group_rows)
    columns = CSV_COLUMNS.get(cfg.command)
    return CommandResult(report, columns, rows if columns else [])
