import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isoflow import iouf
from isoflow.diffusion import ERGODIC, NOT_APPLICABLE, SYNCHRONIZES
from isoflow.errors import DegenerateModelError, ValidationError
from isoflow.iouf import CovarianceModel, OUFlowModel, gaussian_covariance

G = gaussian_covariance()


def _cov(B, beta=1.0, desc="test"):
    return CovarianceModel(B, B, beta, beta, desc)


def test_gaussian_is_valid():
    rep = iouf.validate_covariance(G)
    assert rep.valid and not rep.issues
    assert rep.beta_L_fd == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("B, beta, check", [
    (lambda r: np.exp(-np.asarray(r) ** 2), 1.0, "beta_L=-B_L''(0)"),
    (lambda r: np.exp(-np.abs(np.asarray(r))), 1.0, "B_L'(0)=0"),
    (lambda r: 1.0 - 0.5 * np.asarray(r) ** 2, 1.0, "|B_L|<=1"),
    (lambda r: 1.2 * np.exp(-0.5 * np.asarray(r) ** 2), 1.2, "B_L(0)=1"),
    (lambda r: np.ones_like(np.asarray(r, dtype=float)), 0.0, "not constant"),
])
def test_invalid_covariances(B, beta, check):
    rep = iouf.validate_covariance(_cov(B, beta))
    assert not rep.valid
    assert check in [c for c, _, _ in rep.issues]
    with pytest.raises(ValidationError):
        rep.raise_if_invalid()


@given(st.integers(2, 8), st.floats(0, 5))
def test_top_lyapunov_formula(d, c):
    top = iouf.top_lyapunov(OUFlowModel(d, c, G))
    assert top.value == pytest.approx((d - 2) / 2 - c, abs=1e-12)
    assert top.without_damping - top.value == pytest.approx(c, abs=1e-12)


def test_distance_coefficients_closed_form():
    spec = iouf.distance_diffusion(OUFlowModel(4, 0.5, G))
    r = np.array([1e-6, 0.01, 0.5, 1.0, 3.0, 40.0])
    gap = -np.expm1(-r ** 2 / 2)
    np.testing.assert_allclose(spec.drift(r), 3 * gap / r - 0.5 * r, rtol=1e-13)
    np.testing.assert_allclose(spec.diffusion(r), np.sqrt(2 * gap), rtol=1e-13)


@given(st.floats(-12, 3))
def test_kernel_matches_coefficients(y):
    model = OUFlowModel(3, 0.7, G)
    k = iouf.distance_diffusion(model).kernel
    r = np.exp(y)
    b, s = k.coef(r, k.params)
    gap = -np.expm1(-r * r / 2)
    assert b == pytest.approx(2 * gap / r - 0.7 * r, rel=1e-12)
    assert s == pytest.approx(np.sqrt(2 * gap), rel=1e-12)
    mu, v = k.logcoef(y, k.params)
    assert mu == pytest.approx(b / r - s * s / (2 * r * r), rel=1e-9, abs=1e-12)
    assert v == pytest.approx(s / r, rel=1e-12)


def test_undamped_flow_is_not_applicable():
    rep = iouf.classify(OUFlowModel(4, 0.0, G))
    assert rep.verdict.verdict == NOT_APPLICABLE
    assert rep.reason == iouf.NO_INVARIANT_MEASURE
    assert rep.lambda1 == rep.lambda1_c0 == 1.0


@pytest.mark.parametrize("c, verdict, lam", [(0.5, ERGODIC, 0.5), (1.0, SYNCHRONIZES, 0.0), (2.0, SYNCHRONIZES, -1.0)])
def test_classify_examples(c, verdict, lam):
    rep = iouf.classify(OUFlowModel(4, c, G))
    assert rep.verdict.verdict == verdict
    assert rep.lambda1 == pytest.approx(lam, abs=1e-15)
    assert rep.predicted == verdict


@given(st.integers(2, 6), st.floats(0.05, 3.0))
@settings(max_examples=12)
def test_verdict_follows_sign_of_lambda1(d, c):
    lam = (d - 2) / 2 - c
    if abs(lam) < 1e-3:
        return
    rep = iouf.classify(OUFlowModel(d, c, G))
    assert rep.verdict.verdict == (ERGODIC if lam > 0 else SYNCHRONIZES)
    assert np.isfinite(rep.verdict.speed_total) == (lam > 0)


@pytest.mark.parametrize("kwargs", [dict(d=1, c=1.0), dict(d=2.5, c=1.0), dict(d=3, c=-0.1), dict(d=3, c=np.inf)])
def test_model_validation(kwargs):
    with pytest.raises(ValidationError):
        OUFlowModel(covariance=G, **kwargs)


def test_vanishing_longitudinal_gap_is_degenerate():
    # B_L = 1 near the origin: no longitudinal noise at short range
    bl = lambda r: np.where(np.asarray(r) < 1.0, 1.0, np.exp(-0.5 * (np.asarray(r) - 1.0) ** 2))  # noqa: E731
    cov = CovarianceModel(bl, G.B_N, 1.0, 1.0, "flat")
    with pytest.raises(DegenerateModelError):
        iouf.distance_diffusion(OUFlowModel(3, 1.0, cov))
