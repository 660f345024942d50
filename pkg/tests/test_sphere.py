import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isoflow import sphere
from isoflow.diffusion import ERGODIC, NOT_APPLICABLE, SYNCHRONIZES, scale_density, speed_density, speed_mass
from isoflow.errors import DegenerateModelError, DomainError, ValidationError
from isoflow.sphere import SphereModel

A = SphereModel(3, (0, 1))               # alpha(x) = x: b = 0, sigma = 2 sin r
C = SphereModel(3, (0, 0.5), (0, 1))     # critical: lambda1 = 0
E = SphereModel(3, (), (0, 1))           # speed density sin r
ROT = SphereModel(3, (), (1,))           # rigid rotations

R = np.array([1e-7, 1e-3, 0.2, 1.0, np.pi / 2, 2.5, np.pi - 1e-3, np.pi - 1e-7])


@pytest.mark.parametrize("model, expect", [
    (A, (1, 1, 1)),
    (C, (1.5, 4.5, -1.5)),
    (E, (1, 4, -2)),
    (SphereModel(4, (0, 1)), (1, 1, 4 / 4)),
])
def test_boundary_coefficients(model, expect):
    np.testing.assert_allclose(sphere.boundary_coefficients(model), expect, rtol=1e-12, atol=1e-14)


@pytest.mark.parametrize("model, spectrum, g1", [
    (A, (-2, -4), 0.0),
    (C, (0, -3), 1.0),
    (E, (1, -1), 3.0),
    (SphereModel(4, (0, 1)), (-2, -4, -6), 0.0),
])
def test_spectrum_and_gamma1(model, spectrum, g1):
    np.testing.assert_allclose(sphere.lyapunov_spectrum(model), spectrum, atol=1e-12)
    assert sphere.gamma1(model) == pytest.approx(g1, abs=1e-12)


def test_closed_form_coefficients():
    b, s2 = sphere.distance_coefficients(A, R)
    np.testing.assert_allclose(s2, 4 * np.sin(R) ** 2, rtol=1e-12)
    np.testing.assert_allclose(b, 0.0, atol=1e-12)
    b, s2 = sphere.distance_coefficients(E, R)
    c = np.cos(R)
    np.testing.assert_allclose(s2, 4 * np.sin(R / 2) ** 2, rtol=1e-12)
    np.testing.assert_allclose(b, (1 + 2 * c) * 2 * np.sin(R / 2) ** 2 / np.sin(R), rtol=1e-11)


def test_critical_model_in_the_bulk():
    b, s2 = sphere.distance_coefficients(C, np.pi / 2)
    assert (b, s2) == pytest.approx((1.0, 4.0), rel=1e-12)


def test_scale_and_speed_closed_forms():
    spec = sphere.distance_diffusion(E)
    x = R[1:-1]
    np.testing.assert_allclose(speed_density(spec, x), np.sin(x), rtol=1e-9)
    np.testing.assert_allclose(scale_density(spec, x), 1 / (np.tan(x / 2) * np.sin(x) ** 2), rtol=1e-9)
    assert speed_mass(spec, 0.0, np.pi) == pytest.approx(2.0, rel=1e-9)


def test_verdicts():
    e = sphere.classify(E)
    assert e.verdict.verdict == ERGODIC and e.predicted == ERGODIC
    assert e.verdict.speed_total == pytest.approx(2.0, rel=1e-8)
    c = sphere.classify(C)
    assert c.verdict.verdict == SYNCHRONIZES and c.lambda1 == 0.0
    assert c.verdict.speed_total == np.inf


def test_antipodal_model_is_not_applicable():
    # alpha(1) + alpha(-1) = 0: the drift vanishes, pi is as attracting as 0
    rep = sphere.classify(A)
    assert rep.lambda1 == pytest.approx(-2.0)
    assert rep.verdict.verdict == NOT_APPLICABLE
    assert "speed measure infinite" in rep.verdict.as_dict()["violated"]


def test_rotation_is_degenerate():
    with pytest.raises(DegenerateModelError, match="σ² ≡ 0"):
        sphere.distance_diffusion(ROT)
    with pytest.raises(DegenerateModelError):
        sphere.gamma1(ROT)
    with pytest.raises(DegenerateModelError):
        sphere.classify(ROT)


@pytest.mark.parametrize("kwargs", [
    dict(d=2, a=(1,)), dict(d=3.5, a=(1,)), dict(d=3, a=(-1,)), dict(d=3, a=(0, 0)),
    dict(d=3, b=(np.nan,)), dict(d=3, a=(1,) * 65),
])
def test_model_validation(kwargs):
    with pytest.raises(ValidationError):
        SphereModel(**kwargs)


def test_alpha_beta_domain():
    with pytest.raises(DomainError):
        sphere.alpha_beta(C, 1.5)
    with pytest.raises(DomainError):
        sphere.alpha_beta(C, -1.0)


def _nondegenerate(model):
    try:
        sphere.check_nondegenerate(model, n=200)
    except DegenerateModelError:
        return False
    return True


models = st.builds(
    SphereModel,
    st.integers(3, 5),
    st.lists(st.floats(0, 1), min_size=1, max_size=5).map(tuple),
    st.lists(st.floats(0.05, 1), min_size=1, max_size=5).map(tuple),
).filter(_nondegenerate)


@given(models)
@settings(max_examples=40)
def test_coefficients_agree_with_direct_formula(model):
    # the re-expanded polynomials match the defining formula away from the ends
    r = np.linspace(0.3, np.pi - 0.3, 7)
    al, be = sphere.alpha_beta(model, np.cos(r))
    a1, _ = sphere.alpha_beta(model, 1.0)
    s2 = 2 * (a1 - al * np.cos(r) + be * np.sin(r) ** 2)
    b = (model.d - 2) / np.sin(r) * (a1 * np.cos(r) - al)
    got_b, got_s2 = sphere.distance_coefficients(model, r)
    scale = a1 + abs(sphere.boundary_coefficients(model)[1])
    np.testing.assert_allclose(got_s2, s2, atol=1e-11 * scale)
    np.testing.assert_allclose(got_b, b, atol=1e-11 * scale)


@given(models)
@settings(max_examples=40)
def test_gamma1_and_lambda1_agree(model):
    lam = sphere.lyapunov_spectrum(model)[0]
    g = sphere.gamma1(model)
    if abs(lam) > 1e-9:
        assert np.sign(g - 1) == np.sign(lam)


@given(models)
@settings(max_examples=40)
def test_log_drift_tends_to_lambda1(model):
    # the log-coordinate drift b/r - sigma^2/(2 r^2) tends to lambda_1 at 0
    r = 1e-5
    b, s2 = sphere.distance_coefficients(model, r)
    lam = sphere.lyapunov_spectrum(model)[0]
    assert b / r - s2 / (2 * r * r) == pytest.approx(lam, abs=1e-6 * (1 + abs(lam)) * model.L ** 2)


@given(models)
@settings(max_examples=40)
def test_spectrum_is_non_increasing(model):
    # the gap lambda_n - lambda_{n+1} = alpha'(1) + beta(1) is a nonnegative combination
    spec = sphere.lyapunov_spectrum(model)
    assert len(spec) == model.d - 1
    assert np.all(np.diff(spec) <= 1e-12)


@given(models, st.floats(1e-6, np.pi - 1e-6))
@settings(max_examples=60)
def test_sigma_squared_positive(model, r):
    _, s2 = sphere.distance_coefficients(model, r)
    assert s2 > 0
