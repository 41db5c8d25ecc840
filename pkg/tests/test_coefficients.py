import math

import numpy as np
import pytest
from scipy.integrate import quad

from freqlab.coefficients import (
    Arity,
    CoefficientField,
    FieldError,
    GenerationError,
    beta_vector,
    empirical_modulus,
    generate_holder,
    homogeneous_projection,
    kernel_gradient_constant,
    mollify,
    mu_factor,
    normalize_at_origin,
)
from freqlab.modulus import Modulus


def sample_disk(count, radius=1.0, seed=0, n=2):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((count, n))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return v * (radius * rng.random(count) ** (1.0 / n))[:, None]


# -- mu and beta ---------------------------------------------------------


def test_mu_identity_and_diagonal():
    eye = CoefficientField.identity(2)
    assert mu_factor(eye, (0.2, -0.7)) == pytest.approx(1.0, abs=1e-15)
    d = CoefficientField.diagonal([2.0, 1.0])
    assert mu_factor(d, (0.3, 0.0)) == pytest.approx(2.0, abs=1e-15)
    assert mu_factor(d, (0.1, 0.1)) == pytest.approx(1.5, rel=1e-14)
    assert mu_factor(d, (0.25, 0.25)) == pytest.approx(1.5, rel=1e-14)


def test_mu_isotropic_is_scalar_value():
    f = CoefficientField.affine(1.0, [0.2, 0.0])
    pts = sample_disk(32, seed=3)
    pts = pts[np.linalg.norm(pts, axis=1) > 1e-3]
    assert np.allclose(mu_factor(f, pts), f.evaluate(pts), rtol=1e-15)


def test_mu_beta_origin_rejected():
    d = CoefficientField.diagonal([2.0, 1.0])
    with pytest.raises(FieldError):
        mu_factor(d, (0.0, 0.0))
    with pytest.raises(FieldError):
        beta_vector(d, np.zeros(2))


def test_beta_examples():
    eye = CoefficientField.identity(2)
    x = np.array([0.4, -0.3])
    assert np.allclose(beta_vector(eye, x), x, atol=1e-15)
    d = CoefficientField.diagonal([2.0, 1.0])
    assert np.allclose(beta_vector(d, (0.3, 0.0)), (0.3, 0.0), atol=1e-15)
    b = beta_vector(d, (0.1, 0.1))
    assert np.allclose(b, [0.2 / 1.5, 0.1 / 1.5], rtol=1e-14)


def test_beta_radial_component_is_radius():
    # <beta, x/|x|> = |x| holds for every field, not just diagonal ones
    m = Modulus.log_power(1.0)
    fields = [
        CoefficientField.identity(2),
        CoefficientField.diagonal([2.0, 0.8]),
        CoefficientField.cusp_anisotropic(m, 0.25),
        CoefficientField.diagonal([1.5, 1.0, 0.7]),
    ]
    for f in fields:
        pts = sample_disk(200, seed=11, n=f.n)
        r = np.linalg.norm(pts, axis=1)
        keep = r > 1e-6
        pts, r = pts[keep], r[keep]
        beta = beta_vector(f, pts)
        radial = np.sum(beta * pts / r[:, None], axis=1)
        assert np.max(np.abs(radial - r)) < 1e-12


def test_beta_near_identity_bound():
    # |A - I| <= delta forces |beta - x| <= 3 delta |x|
    for delta in (0.01, 0.1, 0.3):
        d = CoefficientField.diagonal([1.0 + delta, 1.0 - delta])
        pts = sample_disk(300, seed=5)
        r = np.linalg.norm(pts, axis=1)
        keep = r > 1e-6
        pts, r = pts[keep], r[keep]
        dev = np.linalg.norm(beta_vector(d, pts) - pts, axis=1)
        assert np.all(dev <= 3.0 * delta * r + 1e-15)


def test_mu_range_within_ellipticity():
    m = Modulus.log_power(1.0)
    for f in (CoefficientField.cusp_anisotropic(m, 0.25),
              generate_holder(0.7, 0.1, seed=2)):
        pts = sample_disk(400, radius=f.domain_radius, seed=7)
        pts = pts[np.linalg.norm(pts, axis=1) > 1e-6]
        mu = mu_factor(f, pts)
        assert np.all(mu >= f.lam - 1e-9)
        assert np.all(mu <= 1.0 / f.lam + 1e-9)


# -- mollification -------------------------------------------------------


def test_mollify_constant_exact():
    mc = mollify(CoefficientField.constant(3.7), 0.2)
    pts = sample_disk(64, radius=0.79, seed=1)
    assert np.max(np.abs(mc.evaluate(pts) - 3.7)) < 1e-12


def test_mollify_affine_exact():
    # symmetric kernel: odd moments cancel, affine parts pass through
    f = CoefficientField.affine(1.0, [0.2, -0.1])
    mf = mollify(f, 0.1)
    pts = sample_disk(64, radius=0.89, seed=2)
    assert np.max(np.abs(mf.evaluate(pts) - f.evaluate(pts))) < 1e-12


def test_mollify_identity_matrix_exact():
    mf = mollify(CoefficientField.identity(2), 0.1)
    pts = sample_disk(16, radius=0.9, seed=3)
    vals = mf.evaluate(pts)
    assert np.max(np.abs(vals - np.eye(2))) < 1e-12
    assert mf.check_symmetry()


def test_mollify_domain_shrinks():
    mf = mollify(CoefficientField.constant(1.0), 0.25)
    assert mf.domain_radius == pytest.approx(0.75)
    with pytest.raises(FieldError):
        mf.evaluate((0.8, 0.0))
    with pytest.raises(FieldError):
        mollify(CoefficientField.constant(1.0), 1.0)


def test_mollify_sqrt_profile_bounds():
    # a(x) = 0.5 + |x_1|^(1/2) has Holder certificate (1/2, 1); at
    # eps = 0.01 the sup distance over B_0.9 must stay under 0.1 and the
    # gradient under C * 10, dense-sampled on a 100 x 100 grid
    f = CoefficientField.from_callable(
        lambda p: 0.5 + np.sqrt(np.abs(p[:, 0])),
        arity=Arity.ISOTROPIC, n=2, lam=0.5, holder=(0.5, 1.0))
    eps = 0.01
    fm = mollify(f, eps)
    g = np.linspace(-0.636, 0.636, 100)
    xx, yy = np.meshgrid(g, g)
    pts = np.stack([xx.ravel(), yy.ravel()], axis=1)
    pts = pts[np.linalg.norm(pts, axis=1) <= 0.9]
    sup = np.max(np.abs(fm.evaluate(pts) - f.evaluate(pts)))
    assert sup <= eps ** 0.5
    assert fm.meta["sup_distance_bound"] == pytest.approx(0.1)

    # finite-difference gradient along the singular line, worst case
    xs = np.linspace(-0.02, 0.02, 41)
    line = np.stack([xs, np.full_like(xs, 0.1)], axis=1)
    h = 1e-4
    dx = (fm.evaluate(line + [h, 0]) - fm.evaluate(line - [h, 0])) / (2 * h)
    dy = (fm.evaluate(line + [0, h]) - fm.evaluate(line - [0, h])) / (2 * h)
    grad = np.sqrt(dx ** 2 + dy ** 2).max()
    assert grad <= fm.meta["gradient_sup_bound"]
    assert fm.meta["gradient_sup_bound"] == pytest.approx(
        kernel_gradient_constant(2) * eps ** 0.5 / eps)


def test_mollify_metadata_from_declared_modulus():
    m = Modulus.log_power(1.0)
    f = CoefficientField.cusp_isotropic(m, 0.3, anchors=[(0.2, 0.1)])
    fm = mollify(f, 0.05)
    assert fm.meta["sup_distance_bound"] == pytest.approx(float(m.omega(0.05)))


def test_mollify_oscillation_never_grows():
    # convex weights: discrete mollification is an average of shifts
    m = Modulus.log_power(1.0)
    f = CoefficientField.cusp_isotropic(m, 0.3, anchors=[(0.2, 0.1)])
    fm = mollify(f, 0.05)
    pts = sample_disk(500, radius=0.94, seed=9)
    vals = fm.evaluate(pts)
    ref = f.evaluate(pts)
    bound = float(m.omega(0.05))
    assert np.max(np.abs(vals - ref)) <= bound + 1e-12


def test_kernel_gradient_constant_against_quadrature():
    num = quad(lambda r: math.exp(-1 / (1 - r * r)) * 2 * r / (1 - r * r) ** 2 * r,
               0, 1)[0]
    den = quad(lambda r: math.exp(-1 / (1 - r * r)) * r, 0, 1)[0]
    assert kernel_gradient_constant(2) == pytest.approx(num / den, rel=1e-6)


# -- homogeneous projection ----------------------------------------------


def test_projection_angular_field_fixed():
    def angular(p):
        r = np.linalg.norm(p, axis=1)
        out = np.ones(p.shape[0])
        pos = r > 0
        out[pos] += 0.3 * p[pos, 1] / r[pos]
        return out

    f = CoefficientField.from_callable(angular, arity=Arity.ISOTROPIC,
                                       n=2, lam=0.7)
    h = homogeneous_projection(f, 0.6)
    pts = sample_disk(128, seed=4)
    pts = pts[np.linalg.norm(pts, axis=1) > 1e-3]
    assert np.max(np.abs(h.evaluate(pts) - f.evaluate(pts))) < 1e-14


def test_projection_radial_field_collapses():
    f = CoefficientField.from_callable(
        lambda p: 1.0 + np.linalg.norm(p, axis=1),
        arity=Arity.ISOTROPIC, n=2, lam=0.4)
    h = homogeneous_projection(f, 0.5)
    pts = sample_disk(64, seed=5)
    assert np.max(np.abs(h.evaluate(pts) - 1.5)) < 1e-14
    assert h.evaluate((0.0, 0.0)) == pytest.approx(1.5, abs=1e-14)


def test_projection_affine_sphere_distance():
    # a = 1 + 0.1 x_1 frozen at r = 0.5, compared on the sphere of 0.4:
    # difference is 0.1 (0.5 - 0.4) cos(theta), sup exactly 0.01
    f = CoefficientField.affine(1.0, [0.1, 0.0])
    h = homogeneous_projection(f, 0.5)
    theta = np.linspace(0.0, 2.0 * np.pi, 720, endpoint=False)
    sphere = 0.4 * np.stack([np.cos(theta), np.sin(theta)], axis=1)
    sup = np.max(np.abs(h.evaluate(sphere) - f.evaluate(sphere)))
    assert sup == pytest.approx(0.01, rel=1e-10)
    alpha, c_h = f.holder
    assert sup <= c_h * (0.5 - 0.4) ** alpha + 1e-12


def test_projection_scale_invariance_and_idempotence():
    f = generate_holder(0.7, 0.1, seed=3)
    h = homogeneous_projection(f, 0.5)
    x = np.array([0.3, 0.2])
    vals = [h.evaluate(s * x) for s in (0.01, 0.17, 1.0, 2.0)]
    assert np.ptp(vals) < 1e-14
    again = homogeneous_projection(h, 0.9)
    pts = sample_disk(64, seed=6)
    assert np.max(np.abs(again.evaluate(pts) - h.evaluate(pts))) < 1e-14
    assert again.anchor_radius == pytest.approx(0.9)


def test_projection_rejects_matrix_fields():
    with pytest.raises(FieldError):
        homogeneous_projection(CoefficientField.identity(2), 0.5)


# -- empirical regularity ------------------------------------------------


def test_empirical_modulus_affine():
    f = CoefficientField.affine(1.0, [0.2, 0.0])
    emp = empirical_modulus(f, 400)
    assert emp.alpha_hat == pytest.approx(1.0, abs=0.02)
    assert emp.c_h_hat == pytest.approx(0.2, rel=0.05)
    assert emp.modulus is not None
    assert emp.modulus.kind == "tabulated"


def test_empirical_modulus_constant_degenerates():
    emp = empirical_modulus(CoefficientField.constant(2.0), 200)
    assert np.all(emp.oscillations == 0.0)
    assert emp.c_h_hat == 0.0
    assert emp.modulus is None


def test_empirical_modulus_synthetic_target():
    f = generate_holder(0.7, 0.1, seed=1)
    emp = empirical_modulus(f, 400)
    assert 0.6 <= emp.alpha_hat <= 0.8


def test_empirical_modulus_envelope_is_valid_modulus():
    f = generate_holder(0.5, 0.2, seed=8)
    emp = empirical_modulus(f, 300)
    m = emp.modulus
    t = np.array([0.01, 0.05, 0.2])
    assert np.all(m.omega(t) > 0.0)
    assert np.all(np.diff(m.omega(np.linspace(0.01, 0.4, 50))) >= -1e-12)


def test_empirical_modulus_validation():
    f = CoefficientField.constant(1.0)
    with pytest.raises(FieldError):
        empirical_modulus(f, 50)
    with pytest.raises(FieldError):
        empirical_modulus(f, 200, depth=1)


def test_empirical_modulus_deterministic():
    f = generate_holder(0.7, 0.1, seed=1)
    a = empirical_modulus(f, 200)
    b = empirical_modulus(f, 200)
    assert np.array_equal(a.oscillations, b.oscillations)
    assert a.alpha_hat == b.alpha_hat


# -- random Holder fields ------------------------------------------------


def test_generate_holder_zero_amplitude():
    f = generate_holder(0.9, 0.0, seed=4)
    pts = sample_disk(64, seed=7)
    assert np.max(np.abs(f.evaluate(pts) - 1.0)) == 0.0
    assert f.holder == (0.9, 0.0)


def test_generate_holder_normalized_and_elliptic():
    f = generate_holder(0.7, 0.1, seed=1)
    assert float(f.evaluate((0.0, 0.0))) == pytest.approx(1.0, abs=1e-12)
    assert f.check_ellipticity(sample_count=512)
    lo, hi = f.meta["range"]
    assert 0.5 <= lo <= hi <= 2.0


def test_generate_holder_rejects_large_amplitude():
    with pytest.raises(GenerationError):
        generate_holder(0.7, 10.0, seed=1)


def test_generate_holder_deterministic_per_seed():
    pts = sample_disk(64, seed=9)
    a = generate_holder(0.7, 0.1, seed=1).evaluate(pts)
    b = generate_holder(0.7, 0.1, seed=1).evaluate(pts)
    c = generate_holder(0.7, 0.1, seed=2).evaluate(pts)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_generate_holder_three_dimensional():
    f = generate_holder(0.6, 0.1, seed=5, n=3)
    pts = sample_disk(64, seed=10, n=3)
    vals = f.evaluate(pts)
    assert np.all(vals >= 0.5) and np.all(vals <= 2.0)
    assert float(f.evaluate(np.zeros(3))) == pytest.approx(1.0, abs=1e-12)


# -- normalization and serialization ---------------------------------------


def test_normalize_at_origin_scalar():
    f = CoefficientField.affine(2.0, [0.2, 0.0])
    g = normalize_at_origin(f)
    assert g.origin_normalized()
    pts = sample_disk(32, seed=11)
    assert np.allclose(g.evaluate(pts), f.evaluate(pts) / 2.0, rtol=1e-15)


def test_normalize_at_origin_matrix():
    d = CoefficientField.diagonal([2.0, 2.0])
    g = normalize_at_origin(d)
    assert g.origin_normalized()
    with pytest.raises(FieldError):
        normalize_at_origin(CoefficientField.diagonal([2.0, 1.0]))


@pytest.mark.parametrize("build", [
    lambda: CoefficientField.constant(1.3),
    lambda: CoefficientField.identity(2),
    lambda: CoefficientField.diagonal([2.0, 0.9]),
    lambda: CoefficientField.affine(1.0, [0.05, -0.02]),
    lambda: CoefficientField.cusp_isotropic(Modulus.log_power(1.0), 0.3),
    lambda: CoefficientField.cusp_anisotropic(Modulus.log_power(1.0), 0.2),
    lambda: CoefficientField.annulus_bump(0.1, 0.6),
    lambda: generate_holder(0.7, 0.1, seed=1),
    lambda: mollify(CoefficientField.affine(1.0, [0.1, 0.0]), 0.05),
    lambda: homogeneous_projection(CoefficientField.affine(1.0, [0.1, 0.0]), 0.5),
    lambda: normalize_at_origin(CoefficientField.affine(2.0, [0.1, 0.0])),
])
def test_config_roundtrip(build):
    f = build()
    g = CoefficientField.from_config(f.to_config())
    pts = sample_disk(48, radius=min(f.domain_radius, g.domain_radius) * 0.99,
                      seed=12, n=f.n)
    assert np.allclose(g.evaluate(pts), f.evaluate(pts), atol=1e-14)
    assert g.arity is f.arity


def test_custom_fields_not_serializable():
    f = CoefficientField.from_callable(lambda p: np.ones(p.shape[0]),
                                       arity=Arity.ISOTROPIC, n=2, lam=1.0)
    with pytest.raises(FieldError):
        f.to_config()


def test_evaluate_outside_domain_rejected():
    f = CoefficientField.constant(1.0)
    with pytest.raises(FieldError):
        f.evaluate((1.2, 0.0))


def test_symmetry_check_catches_asymmetric():
    def crooked(pts):
        out = np.broadcast_to(np.eye(2), (pts.shape[0], 2, 2)).copy()
        out[:, 0, 1] += 0.1
        return out

    f = CoefficientField.from_callable(crooked, arity=Arity.ANISOTROPIC,
                                       n=2, lam=0.5)
    assert not f.check_symmetry()
    assert CoefficientField.cusp_anisotropic(Modulus.log_power(1.0), 0.2).check_symmetry()
