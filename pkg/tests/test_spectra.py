import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rdode.acceptance import random_stable_jacobian
from rdode.errors import ResolventSingular, UnsupportedShape
from rdode.grid import Grid, laplacian_eigenvalues
from rdode.linearize import JacobianField, assemble_operator, jacobian_field
from rdode.model import builtin_model
from rdode.spectra import (SpectrumReport, analyze, check_sufficient_stability, classify,
                           compute_spectrum, default_tol_ess, discrete_eigenvalues,
                           essential_spectrum, evans_function, evans_sign_changes,
                           operator_eigenvalues, spectral_bound)


def _report(s_A, s_inf, kept=()):
    kept = np.asarray(kept, dtype=complex)
    return SpectrumReport(np.array([s_A], dtype=complex), s_A, kept, np.empty(0, complex), s_inf,
                          max(s_A, s_inf), 8, 0.1)


def test_essential_constant_block():
    jac = JacobianField.constant(np.array([[-1.0, 0.0], [0.0, -2.0]]), 1, 10)
    np.testing.assert_array_equal(essential_spectrum(jac), -np.ones(10))


def test_essential_of_hysteresis_pattern(hyst_pattern):
    model, grid, steady = hyst_pattern
    ess = essential_spectrum(jacobian_field(model, steady, grid))
    dp = model.params.dp(steady.u[0])
    assert np.all(ess.imag == 0)
    assert ess.real.min() >= -dp.max() - 1e-12 and ess.real.max() <= -dp.min() + 1e-12
    assert ess.real.max() < 0


def test_essential_positive_with_minus_class(ddi_patterns):
    model, grid, pats = ddi_patterns
    ess = essential_spectrum(jacobian_field(model, pats["u-"], grid))
    assert ess.real.max() > 0


def test_essential_of_two_by_two_blocks(rng):
    A = rng.normal(size=(6, 2, 2))
    jac = JacobianField(A, np.zeros((6, 2, 1)), np.zeros((6, 1, 2)), np.zeros((6, 1, 1)))
    ref = np.concatenate([np.linalg.eigvals(a) for a in A])
    np.testing.assert_allclose(np.sort_complex(essential_spectrum(jac)), np.sort_complex(ref))


def test_zero_jacobian_keeps_laplacian_modes():
    n = 64
    grid = Grid(n)
    op = assemble_operator(JacobianField.constant(np.zeros((2, 2)), 1, n), grid, (1.0,))
    mu = laplacian_eigenvalues(grid, 1.0)
    kept, discarded = discrete_eigenvalues(op, np.zeros(1), 0.5 * abs(mu[1]))
    np.testing.assert_allclose(np.sort(kept.real), np.sort(mu[1:]), rtol=1e-9)
    assert discarded.size == n + 1


def test_huge_tolerance_discards_everything(hyst_analysis):
    op, jac = hyst_analysis[0], hyst_analysis[1]
    kept, discarded = discrete_eigenvalues(op, essential_spectrum(jac), 1e9)
    assert kept.size == 0 and discarded.size == op.size


def test_nonpositive_tolerance_rejected(hyst_analysis):
    with pytest.raises(ValueError):
        discrete_eigenvalues(hyst_analysis[0], np.zeros(1), 0.0)


def test_constant_s2_kept_matches_modal(hyst_constants):
    model, grid, states = hyst_constants
    op, jac, report, verdict, _ = analyze(model, states[2], grid)
    J = jac.full()[0]
    d = model.diffusion[0]
    modal = np.concatenate([np.linalg.eigvals(J - np.diag([0.0, d * abs(mu)]))
                            for mu in laplacian_eigenvalues(grid, 1.0)])
    far = np.abs(modal - J[0, 0]) > report.tol_ess
    np.testing.assert_allclose(np.sort(report.discrete_eigs.real), np.sort(modal[far].real), rtol=1e-8)
    assert verdict.label == "Stable"


def test_report_invariants(hyst_analysis):
    report = hyst_analysis[2]
    dist = np.min(np.abs(report.discrete_eigs[:, None] - report.essential_samples[None, :]), axis=1)
    assert np.all(dist > report.tol_ess)
    assert report.s_L >= report.s_A and report.s_L >= report.s_inf
    assert report.tol_ess == pytest.approx(default_tol_ess(Grid(report.grid_n), report.essential_samples))
    assert {row[2] for row in report.to_rows()} == {"essential", "discrete", "discarded"}


def test_hysteresis_pattern_stable(hyst_analysis):
    _, _, report, verdict, sufficient = hyst_analysis
    assert verdict.label == "Stable" and sufficient.passed
    assert report.leading_discrete().real == pytest.approx(-0.5629, abs=1e-3)


def test_evans_vanishes_at_kept_eigenvalue(hyst_pattern, hyst_analysis):
    model, grid, steady = hyst_pattern
    jac, report = hyst_analysis[1], hyst_analysis[2]
    lam = report.leading_discrete().real
    segment = np.linspace(lam - 0.2, lam + 0.2, 81)
    scale = np.max(np.abs(evans_function(jac, grid, model.diffusion, segment)))
    assert abs(evans_function(jac, grid, model.diffusion, lam)) <= 1e-4 * scale


def test_evans_roots_match_kept_real_eigenvalues(hyst_pattern, hyst_analysis):
    model, grid, steady = hyst_pattern
    jac, report = hyst_analysis[1], hyst_analysis[2]
    targets = [z.real for z in report.discrete_eigs if abs(z.imag) < 1e-12 and report.s_A < z.real < 0]
    assert targets
    roots = evans_sign_changes(jac, grid, model.diffusion, report.s_A + 1e-3, -1e-3, 801)
    for lam in targets:
        assert np.min(np.abs(roots - lam)) <= 5 * grid.h ** 2


def test_evans_nonzero_right_of_spectrum(hyst_pattern, hyst_analysis):
    model, grid, _ = hyst_pattern
    op, jac = hyst_analysis[0], hyst_analysis[1]
    start = float(np.max(operator_eigenvalues(op).real)) + 1.0
    vals = evans_function(jac, grid, model.diffusion, np.linspace(start, start + 1.0, 50))
    assert np.min(np.abs(vals)) > 1e-3


def test_evans_singular_at_essential_sample(hyst_pattern, hyst_analysis):
    model, grid, _ = hyst_pattern
    jac = hyst_analysis[1]
    with pytest.raises(ResolventSingular):
        evans_function(jac, grid, model.diffusion, jac.A[5, 0, 0])


def test_evans_needs_scalar_blocks():
    jac = JacobianField.constant(-np.eye(3), 2, 4)
    with pytest.raises(UnsupportedShape):
        evans_function(jac, Grid(4), (1.0,), 1.0)


def test_spectral_bound_examples():
    assert spectral_bound(_report(-0.5, -1.2)) == -0.5
    assert spectral_bound(_report(-1.0, -np.inf)) == -1.0


def test_ddi_minus_pattern_unstable(ddi_patterns):
    model, grid, pats = ddi_patterns
    _, _, report, verdict, _ = analyze(model, pats["u-"], grid)
    assert report.s_L > 0 and report.s_A > 0
    assert verdict.label == "Unstable" and "s(A*) > 0" in verdict.reasons


def test_ddi_plus_pattern_stable(ddi_patterns):
    model, grid, pats = ddi_patterns
    _, _, report, verdict, sufficient = analyze(model, pats["u+"], grid)
    assert sufficient.passed and report.s_L < 0 and verdict.label == "Stable"


def test_sufficient_condition_cases(hyst_pattern, bistable_pattern, hyst_constants):
    model, grid, steady = hyst_pattern
    assert check_sufficient_stability(jacobian_field(model, steady, grid)).passed
    bmodel, bgrid, bsteady = bistable_pattern
    report = check_sufficient_stability(jacobian_field(bmodel, bsteady, bgrid))
    assert not report.passed and report.min_det <= 1e-10
    cmodel, cgrid, states = hyst_constants
    s1 = check_sufficient_stability(jacobian_field(cmodel, states[1], cgrid))
    assert not s1.passed and s1.min_det < 0
    assert not s1.to_dict()["conditions"]["A*D* - B*C* > 0"]


def test_sufficient_condition_shape():
    with pytest.raises(UnsupportedShape):
        check_sufficient_stability(JacobianField.constant(-np.eye(3), 2, 4))


@pytest.mark.parametrize("s_L,label", [(-0.3, "Stable"), (0.2, "Unstable"), (1e-6, "Inconclusive")])
def test_classify_examples(s_L, label):
    verdict = classify(_report(s_L, -np.inf), margin=1e-4)
    assert verdict.label == label


def test_classify_reasons_for_discrete_instability():
    verdict = classify(_report(-1.0, 0.3, kept=[0.3]))
    assert verdict.label == "Unstable"
    assert any("discrete eigenvalue" in r for r in verdict.reasons)
    with pytest.raises(ValueError):
        classify(_report(-1.0, 0.3), margin=-1.0)


@given(st.floats(-5, 5), st.floats(1e-8, 1e-1))
def test_classify_label_invariant(s_L, margin):
    label = classify(_report(s_L, -np.inf), margin).label
    if label == "Stable":
        assert s_L < -margin
    elif label == "Unstable":
        assert s_L > margin
    else:
        assert abs(s_L) <= margin


def test_bistable_pattern_unstable(bistable_pattern):
    model, grid, steady = bistable_pattern
    _, _, report, verdict, _ = analyze(model, steady, grid)
    assert verdict.label == "Unstable"
    assert report.leading_discrete().real > 0 and report.s_A < 0


def test_similarity_rescaling_invariance(hyst_pattern, hyst_analysis):
    model, grid, steady = hyst_pattern
    jac, report = hyst_analysis[1], hyst_analysis[2]
    s = 7.5  # v -> s v
    scaled = JacobianField(jac.A, jac.B / s, jac.C * s, jac.D)
    other = compute_spectrum(assemble_operator(scaled, grid, model.diffusion), scaled, report.tol_ess)
    np.testing.assert_allclose(np.sort(other.discrete_eigs.real), np.sort(report.discrete_eigs.real),
                               atol=1e-8)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(1e-3, 1.0))
def test_sufficient_condition_implies_negative_spectrum(seed, d):
    rng = np.random.default_rng(seed)
    n = 32
    jac = random_stable_jacobian(rng, n)
    assert check_sufficient_stability(jac).passed
    eigs = operator_eigenvalues(assemble_operator(jac, Grid(n), (d,)))
    assert eigs.real.max() < 1e-8


def test_sigma0_flag_only_for_complex_ring():
    n = 24
    theta = np.linspace(0, 2 * np.pi, n, endpoint=False)
    A = np.zeros((n, 2, 2))
    # eigenvalues -3 + cos(theta) +- i (sin(theta) + 1.5) trace a ring around -3
    A[:, 0, 0] = A[:, 1, 1] = -3.0 + np.cos(theta)
    A[:, 0, 1] = np.sin(theta) + 1.5
    A[:, 1, 0] = -(np.sin(theta) + 1.5)
    # decoupled v block: its mean mode sits at -3, inside the ring of essential samples
    jac = JacobianField(A, np.zeros((n, 2, 1)), np.zeros((n, 1, 2)), np.full((n, 1, 1), -3.0))
    report = compute_spectrum(assemble_operator(jac, Grid(n), (1.0,)), jac, tol_ess=0.1)
    assert set(report.flagged_sigma0.tolist()) <= set(report.discrete_eigs.tolist())
    np.testing.assert_allclose(report.flagged_sigma0, [-3.0], atol=1e-9)
    m1 = JacobianField.constant(np.array([[-1.0, 0.0], [0.0, -1.0]]), 1, n)
    assert compute_spectrum(assemble_operator(m1, Grid(n), (1.0,)), m1).flagged_sigma0.size == 0
