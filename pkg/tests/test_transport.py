import numpy as np
import pytest

from holonomylab import finsler, transport
from holonomylab.finsler import catalog_norm
from holonomylab.jets import SmoothMap
from holonomylab.transport import (
    CurveSpec,
    FlowEscapeError,
    LoopSpec,
    ParallelogramTransporter,
    TransportFailure,
    fibered_holonomy_family,
    flow_curve,
    flow_transport_discrepancy,
    holonomy_map,
    horizontal_flow,
    indicatrix_samples,
    integrate,
    parallel_transport,
    parallelogram_derivatives,
    parallelogram_holonomy,
)


def constant_field(vec, manifold, name="const"):
    vec = np.asarray(vec, dtype=float)

    def fun(args):
        return [args[0] * 0.0 + vec[i] for i in range(len(vec))]

    return SmoothMap(fun, manifold.dim, manifold.dim, lo=manifold.lo, hi=manifold.hi, name=name)


@pytest.fixture(scope="module")
def sphere():
    return catalog_norm("sphere")


@pytest.fixture(scope="module")
def funk():
    return catalog_norm("funk_disk")


# -- integrator ------------------------------------------------------------------


def test_integrator_quadrature():
    y, stats = integrate(lambda t, y: np.array([np.cos(t)]), 0.0, 2.0, np.array([0.0]))
    assert abs(y[0] - np.sin(2.0)) < 1e-10
    assert stats["accepted"] >= 1


def test_integrator_backward():
    y, _ = integrate(lambda t, y: y.copy(), 1.0, 0.0, np.array([np.e]))
    assert abs(y[0] - 1.0) < 1e-9


def test_integrator_batched_states():
    # dy/dt = a*y columnwise, a = 1, 2
    a = np.array([1.0, 2.0])
    y0 = np.ones((1, 2))
    y, _ = integrate(lambda t, y: y * a, 0.0, 1.0, y0)
    np.testing.assert_allclose(y[0], [np.e, np.e ** 2], rtol=1e-9)


def test_integrator_underflow_reports_state():
    man = finsler.ChartManifold(1, (0.0,), (1.0,), name="unit")

    def rhs(t, y):
        man.require(y)  # leaves the box at y = 1
        return np.array([1.0])

    with pytest.raises(TransportFailure) as info:
        integrate(rhs, 0.0, 2.0, np.array([0.5]))
    assert info.value.last_state[0] == pytest.approx(1.0, abs=1e-6)
    assert "underflow" in info.value.reason


# -- curves ----------------------------------------------------------------------


def test_curve_point_velocity_and_reverse():
    c = CurveSpec.line_segment([0.0, 0.0], [2.0, 4.0])
    np.testing.assert_allclose(c.point(0.5), [1.0, 2.0])
    np.testing.assert_allclose(c.velocity(0.25), [2.0, 4.0])
    r = c.reverse()
    np.testing.assert_allclose(r.point(0.0), [2.0, 4.0])
    np.testing.assert_allclose(r.velocity(0.5), [-2.0, -4.0])


def test_expression_curve():
    c = CurveSpec.from_expressions(["cos(2*pi*t)", "sin(2*pi*t)"])
    np.testing.assert_allclose(c.point(0.25), [0.0, 1.0], atol=1e-12)
    np.testing.assert_allclose(c.velocity(0.0), [0.0, 2 * np.pi], atol=1e-12)
    assert c.closure_gap() < 1e-12
    c.as_loop()  # closes, so this must not raise


def test_mismatched_pieces_rejected():
    a = CurveSpec.line_segment([0.0, 0.0], [1.0, 0.0])
    b = CurveSpec.line_segment([5.0, 5.0], [6.0, 5.0])
    with pytest.raises(ValueError, match="join"):
        a.concat(b)


def test_open_curve_is_not_a_loop():
    c = CurveSpec.line_segment([0.0, 0.0], [1.0, 0.0])
    with pytest.raises(ValueError, match="close"):
        c.as_loop()


# -- transport contracts -----------------------------------------------------------


def test_euclidean_transport_is_identity():
    eu = catalog_norm("euclidean")
    c = CurveSpec.from_expressions(["t*2 - 1", "sin(3*t)"])
    r = parallel_transport(eu, c, np.array([1.0, 2.0]))
    np.testing.assert_allclose(r.y_end, [1.0, 2.0], atol=1e-12)
    assert r.norm_drift < 1e-12
    assert not r.flagged


def test_norm_preserved_on_sphere_loop(sphere):
    loop = LoopSpec.rectangle([0.7, 0.0], [1.4, 0.5])
    v = np.array([0.3, 0.8])
    r = parallel_transport(sphere, loop, v)
    assert r.norm_drift < 1e-8 * r.norm_start
    assert not r.flagged


def test_positive_homogeneity(sphere):
    loop = LoopSpec.rectangle([0.8, -0.2], [1.3, 0.4])
    v = np.array([0.5, -0.1])
    base = parallel_transport(sphere, loop, v).y_end
    lams = np.array([0.5, 2.0, 10.0])
    batch = v[:, None] * lams
    out = parallel_transport(sphere, loop, batch).y_end
    for i, lam in enumerate(lams):
        rel = np.max(np.abs(out[:, i] - lam * base)) / (lam * np.max(np.abs(base)))
        assert rel < 1e-8, lam


def test_gauss_bonnet_rectangle(sphere):
    # transport around [th1,th2] x [ph1,ph2] rotates the frame by the
    # enclosed spherical area (ph2 - ph1)(cos th1 - cos th2)
    th1, th2, ph1, ph2 = 0.7, 1.4, 0.0, 0.5
    loop = LoopSpec.rectangle([th1, ph1], [th2, ph2])
    p = loop.start
    v = np.array([1.0, 0.0])
    got = parallel_transport(sphere, loop, v).y_end

    def frame_angle(w):
        return np.arctan2(w[1] * np.sin(p[0]), w[0])

    alpha = frame_angle(got) - frame_angle(v)
    area = (ph2 - ph1) * (np.cos(th1) - np.cos(th2))
    assert alpha == pytest.approx(area, abs=1e-8)


def test_holonomy_rotates_all_samples_equally(sphere):
    loop = LoopSpec.rectangle([0.9, 0.1], [1.2, 0.6])
    p = loop.start
    samples = indicatrix_samples(sphere, p, 6)
    out = holonomy_map(sphere, loop, samples)
    sin_t = np.sin(p[0])

    def angles(w):
        return np.arctan2(w[1] * sin_t, w[0])

    shifts = np.unwrap(angles(out) - angles(samples))
    assert np.max(np.abs(shifts - shifts[0])) < 1e-8
    # outputs stay on the indicatrix
    assert np.max(np.abs(sphere.value(p, out) - 1.0)) < 1e-8


def test_constant_loop_is_identity(sphere):
    p = np.array([1.0, 0.3])
    loop = LoopSpec.constant(p)
    samples = indicatrix_samples(sphere, p, 5)
    out = holonomy_map(sphere, loop, samples)
    np.testing.assert_allclose(out, samples, atol=1e-12)


def test_reversal_inverts(funk):
    loop = LoopSpec.rectangle([-0.2, -0.15], [0.25, 0.2])
    p = loop.start
    samples = indicatrix_samples(funk, p, 4)
    there = holonomy_map(funk, loop, samples)
    # transported vectors are on the indicatrix again, so the reversed loop accepts them
    back = holonomy_map(funk, loop.reverse(), there)
    assert np.max(np.abs(back - samples)) < 1e-7


def test_composition_law(funk):
    a = CurveSpec.line_segment([-0.3, 0.0], [0.2, 0.1])
    b = CurveSpec.line_segment([0.2, 0.1], [0.0, -0.25])
    v = np.array([0.8, -0.3])
    v1 = parallel_transport(funk, a, v).y_end
    v2 = parallel_transport(funk, b, v1).y_end
    vc = parallel_transport(funk, a.concat(b), v).y_end
    assert np.max(np.abs(v2 - vc)) < 1e-7


def test_transport_rejects_zero_vector(sphere):
    c = CurveSpec.line_segment([1.0, 0.0], [1.2, 0.0])
    with pytest.raises(ValueError):
        parallel_transport(sphere, c, np.zeros(2))


def test_transport_fails_outside_chart(funk):
    # segment marches straight out of the funk box
    c = CurveSpec.line_segment([0.0, 0.0], [2.0, 0.0])
    with pytest.raises(TransportFailure):
        parallel_transport(funk, c, np.array([1.0, 0.0]))


def test_holonomy_requires_indicatrix_samples(sphere):
    loop = LoopSpec.rectangle([0.9, 0.0], [1.1, 0.2])
    with pytest.raises(ValueError, match="indicatrix"):
        holonomy_map(sphere, loop, np.array([[2.0], [0.0]]))


def test_indicatrix_samples_unit_norm(funk):
    p = np.array([0.2, -0.3])
    s = indicatrix_samples(funk, p, 9)
    assert s.shape == (2, 9)
    np.testing.assert_allclose(funk.value(p, s), np.ones(9), atol=1e-12)
    s3 = indicatrix_samples(catalog_norm("euclidean", dim=3), np.zeros(3), 11)
    np.testing.assert_allclose(np.linalg.norm(s3, axis=0), np.ones(11), atol=1e-12)


# -- flows -------------------------------------------------------------------------


def test_flow_curve_matches_known_flow():
    man = finsler.ChartManifold(2, (-5, -5), (5, 5))
    # X = (-x2, x1): rotation flow
    X = SmoothMap(lambda a: [-a[1], a[0]], 2, 2, lo=man.lo, hi=man.hi)
    piece = flow_curve(X, np.array([1.0, 0.0]), np.pi / 2)
    end = piece.point_velocity(1.0)[0]
    np.testing.assert_allclose(end, [0.0, 1.0], atol=1e-9)
    mid = piece.point_velocity(0.5)[0]
    np.testing.assert_allclose(mid, [np.cos(np.pi / 4), np.sin(np.pi / 4)], atol=1e-9)


def test_flow_transport_discrepancy_zero_field(sphere):
    Z = constant_field([0.0, 0.0], sphere.manifold)
    assert flow_transport_discrepancy(sphere, Z, np.array([1.0, 0.0]), np.array([1.0, 1.0]), 0.7) == 0.0


def test_flow_transport_discrepancy_euclidean():
    eu = catalog_norm("euclidean")
    X = constant_field([1.0, -0.5], eu.manifold)
    d = flow_transport_discrepancy(eu, X, np.array([0.0, 0.0]), np.array([2.0, 1.0]), 1.5)
    assert d < 1e-10


def test_flow_transport_discrepancy_sphere(sphere):
    X = constant_field([0.0, 1.0], sphere.manifold, name="dphi")
    d = flow_transport_discrepancy(
        sphere, X, np.array([1.1, 0.2]), np.array([0.3, -0.4]), 0.5
    )
    assert d < 1e-7


def test_horizontal_flow_moves_base_along_flow(sphere):
    X = constant_field([0.2, 1.0], sphere.manifold)
    p = np.array([1.2, 0.0])
    x_end, v_end = horizontal_flow(sphere, X, p, np.array([1.0, 0.5]), 0.4)
    np.testing.assert_allclose(x_end, p + 0.4 * np.array([0.2, 1.0]), atol=1e-9)
    f0 = sphere.value(p, np.array([1.0, 0.5]))
    f1 = sphere.value(x_end, v_end)
    assert abs(f1 - f0) < 1e-8  # horizontal flow preserves the norm too


# -- parallelogram loops -------------------------------------------------------------


def test_parallelogram_identity_at_zero(sphere):
    X = constant_field([1.0, 0.0], sphere.manifold)
    Y = constant_field([0.0, 1.0], sphere.manifold)
    p = np.array([np.pi / 2, 0.0])
    samples = indicatrix_samples(sphere, p, 4)
    out = parallelogram_holonomy(sphere, X, Y, p, 0.0, samples)
    np.testing.assert_array_equal(out, samples)


def test_parallelogram_loop_closes(sphere):
    X = constant_field([1.0, 0.0], sphere.manifold)
    Y = constant_field([0.0, 1.0], sphere.manifold)
    tr = ParallelogramTransporter(sphere, X, Y, np.array([1.0, 0.2]))
    for t in (0.08, -0.05):
        assert tr.loop(t).loop.closure_gap() < 1e-12


def test_parallelogram_derivatives_on_sphere(sphere):
    # at the equator with X = d/dtheta, Y = d/dphi, v = d/dtheta the second
    # derivative is exactly (0, 2): first-order term vanishes, curvature term
    # has unit sectional curvature
    X = constant_field([1.0, 0.0], sphere.manifold)
    Y = constant_field([0.0, 1.0], sphere.manifold)
    p = np.array([np.pi / 2, 0.0])
    v = np.array([1.0, 0.0])
    (d1, e1), (d2, e2) = parallelogram_derivatives(sphere, X, Y, p, v)
    assert np.max(np.abs(d1)) < 1e-8
    np.testing.assert_allclose(d2, [0.0, 2.0], atol=2e-4)
    assert e2 < 1e-4


def test_parallelogram_flow_escape_reports_max_scale(funk):
    X = constant_field([1.0, 0.0], funk.manifold)
    Y = constant_field([0.0, 1.0], funk.manifold)
    p = np.array([0.6, 0.6])  # near the box corner: big flows must escape
    samples = indicatrix_samples(funk, p, 3)
    with pytest.raises(FlowEscapeError) as info:
        parallelogram_holonomy(funk, X, Y, p, 0.5, samples)
    t_ok = info.value.max_admissible_t
    assert 0.0 <= t_ok < 0.5
    if t_ok > 1e-3:
        parallelogram_holonomy(funk, X, Y, p, 0.5 * t_ok, samples)


def test_fibered_family_identity_and_restriction(sphere):
    X = constant_field([1.0, 0.0], sphere.manifold)
    Y = constant_field([0.0, 1.0], sphere.manifold)
    grid = [np.array([1.0, 0.0]), np.array([1.4, 0.3])]
    fam0 = fibered_holonomy_family(sphere, X, Y, grid, 0.0, samples_per_fiber=3)
    assert fam0.all_ok
    for fib in fam0.fibers:
        np.testing.assert_array_equal(fib.transported, fib.samples)
    fam = fibered_holonomy_family(sphere, X, Y, grid[:1], 0.05, samples_per_fiber=3)
    direct = parallelogram_holonomy(
        sphere, X, Y, grid[0], 0.05, indicatrix_samples(sphere, grid[0], 3)
    )
    np.testing.assert_array_equal(fam.fibers[0].transported, direct)


def test_fibered_family_collects_failures(funk):
    X = constant_field([1.0, 0.0], funk.manifold)
    Y = constant_field([0.0, 1.0], funk.manifold)
    grid = [np.array([0.0, 0.0]), np.array([0.62, 0.62])]
    fam = fibered_holonomy_family(funk, X, Y, grid, 0.3, samples_per_fiber=3)
    assert fam.num_failed == 1
    assert fam.fibers[0].ok
    assert not fam.fibers[1].ok
    assert fam.fibers[1].message
