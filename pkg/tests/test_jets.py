import numpy as np
import numpy.polynomial.polynomial as P
import pytest

from holonomylab import jets
from holonomylab.jets import (
    DomainBoxError,
    Jet,
    JetDomainError,
    JetOrderError,
    JetShapeError,
    SmoothMap,
    compose_table,
    curve_derivative,
    finite_difference_weights,
    grouped_space,
    jet_arithmetic,
    jet_point,
    jet_space,
    jet_variable,
    mixed_partial,
    richardson_extrapolate,
)


def test_square_jet_matches_hand_derivatives():
    sp = jet_space(1, 2)
    x = jet_variable(sp, 0, 3.0)
    f = x * x
    assert [f.derivative(k) for k in range(3)] == [9.0, 6.0, 2.0]


def test_first_order_product():
    sp = jet_space(1, 2)
    x = jet_variable(sp, 0, 1.0)
    np.testing.assert_array_equal((x * x).coeffs, [1.0, 2.0, 1.0])


def test_sqrt_of_square_recovers_identity():
    sp = jet_space(1, 2)
    x = jet_variable(sp, 0, 2.0)
    np.testing.assert_allclose((x * x).sqrt().coeffs, [2.0, 1.0, 0.0], atol=1e-14)


def test_polynomial_arithmetic_is_bit_exact():
    # ring ops on polynomial jets incur no rounding beyond the fp ops themselves
    sp = jet_space(1, 5)
    x = jet_variable(sp, 0, 0.5)
    f = (x * x * x - 2.0 * x + 1.0) * (x * x + 4.0)
    expect = np.array(
        [P.polyval(0.5, P.polyder(P.polymul([1, -2, 0, 1], [4, 0, 1]), m)) for m in range(6)]
    )
    got = f.coeffs * sp.fact
    np.testing.assert_allclose(got, expect, rtol=1e-15)


def test_division_and_power_consistency():
    sp = jet_space(1, 4)
    x = jet_variable(sp, 0, 1.3)
    lhs = (x ** 3 / x).coeffs
    rhs = (x * x).coeffs
    np.testing.assert_allclose(lhs, rhs, atol=1e-13)
    np.testing.assert_allclose((x ** -2).coeffs, (1.0 / (x * x)).coeffs, atol=1e-13)
    np.testing.assert_allclose((x ** 0.5).coeffs, x.sqrt().coeffs, atol=1e-13)


def test_analytic_functions_match_richardson():
    for name in ["sin", "cos", "exp", "log", "sqrt"]:
        sp = jet_space(1, 4)
        x = jet_variable(sp, 0, 0.7)
        j = getattr(x, name)()
        for k in range(1, 4):
            est = curve_derivative(
                lambda t, n=name: getattr(np, n)(0.7 + t), k, mode="richardson"
            )
            assert abs(j.derivative(k) - est.value) < 1e-6, (name, k)


def test_domain_errors():
    sp = jet_space(1, 3)
    with pytest.raises(JetDomainError):
        jet_variable(sp, 0, -1.0).sqrt()
    with pytest.raises(JetDomainError):
        jet_variable(sp, 0, 0.0).log()
    with pytest.raises(JetDomainError):
        x = jet_variable(sp, 0, 0.0)
        (x * x) / x


def test_mixed_space_arithmetic_rejected():
    a = jet_variable(jet_space(1, 2), 0, 1.0)
    b = jet_variable(jet_space(1, 3), 0, 1.0)
    with pytest.raises(JetShapeError):
        a * b


def test_derivative_order_guard():
    sp = jet_space(1, 2)
    x = jet_variable(sp, 0, 1.0)
    with pytest.raises(JetOrderError):
        x.derivative(3)


def test_grouped_space_keeps_per_group_caps():
    sp = grouped_space(((1, 3), (1, 2)))
    t = jet_variable(sp, 0, 0.0)
    s = jet_variable(sp, 1, 0.0)
    f = (t ** 3) * (s ** 2)
    assert f.derivative((3, 2)) == pytest.approx(12.0)  # 3! * 2!
    with pytest.raises(JetOrderError):
        f.derivative((4, 0))


def test_shift_acts_as_partial_derivative():
    sp = grouped_space(((2, 3),))
    x = jet_variable(sp, 0, 0.4)
    y = jet_variable(sp, 1, -0.2)
    f = x * x * y + y * y * y
    dfdx = f.derivative_table(0)
    # d/dx (x^2 y + y^3) = 2xy
    assert dfdx.value == pytest.approx(2 * 0.4 * -0.2)
    assert dfdx.derivative((1, 1)) == pytest.approx(2.0)


def test_truncation_to_lower_caps():
    sp = grouped_space(((1, 3), (1, 3)))
    x = jet_variable(sp, 0, 0.3)
    y = jet_variable(sp, 1, 0.9)
    f = x.exp() * y.sin()
    g = f.truncated(((1, 1), (1, 2)))
    assert g.derivative((1, 2)) == pytest.approx(f.derivative((1, 2)))
    with pytest.raises(JetOrderError):
        g.derivative((2, 0))


def test_batched_coefficients_broadcast():
    sp = jet_space(1, 3)
    vals = np.array([0.5, 1.0, 2.0])
    x = jet_variable(sp, 0, vals)
    f = x.exp() * x
    single = [jet_variable(sp, 0, v).exp() * jet_variable(sp, 0, v) for v in vals]
    for b, jb in enumerate(single):
        np.testing.assert_allclose(f.coeffs[:, b], jb.coeffs, rtol=1e-14)
    # unbatched jet times a batch vector promotes
    g = jet_variable(sp, 0, 1.0) * np.array([1.0, 2.0])
    assert g.batch == 2
    np.testing.assert_allclose(g.coeffs[:, 1], 2 * g.coeffs[:, 0])


def test_compose_table_equals_polynomial_composition():
    rng = np.random.default_rng(7)
    fc, gc = rng.normal(size=5), rng.normal(size=5)
    sp = jet_space(1, 4)
    g = Jet(sp, gc.copy())
    c0 = g.value
    ftab = Jet(sp, np.array([P.polyval(c0, P.polyder(fc, m)) for m in range(5)]) / sp.fact)
    h = compose_table(ftab, [g], center=[c0])
    comp = np.zeros(1)
    powg = np.array([1.0])
    for m in range(5):
        comp = P.polyadd(comp, fc[m] * powg)
        powg = P.polymul(powg, gc)[:5]
    expect = np.array([P.polyval(0.0, P.polyder(comp[:5], m)) for m in range(5)])
    np.testing.assert_allclose(h.coeffs * sp.fact, expect, rtol=1e-12, atol=1e-12)


def test_jet_arithmetic_dispatcher():
    sp = jet_space(1, 2)
    a = jet_variable(sp, 0, 2.0)
    b = jet_variable(sp, 0, 3.0)
    np.testing.assert_allclose(jet_arithmetic(a, b, "add").coeffs, (a + b).coeffs)
    np.testing.assert_allclose(jet_arithmetic(a, b, "mul").coeffs, (a * b).coeffs)
    np.testing.assert_allclose(jet_arithmetic(a, op="sqrt").coeffs, a.sqrt().coeffs)
    with pytest.raises(ValueError):
        jet_arithmetic(a, b, "frobnicate")


def test_jet_point_seeds_all_variables():
    sp = grouped_space(((2, 2),))
    pt = jet_point(sp, np.array([1.0, 2.0]))
    f = pt[0] * pt[1]
    assert f.value == pytest.approx(2.0)
    assert f.derivative((1, 1)) == pytest.approx(1.0)
    assert f.derivative((1, 0)) == pytest.approx(2.0)


def test_smoothmap_jacobian_and_domain_box():
    m = SmoothMap(lambda a: [a[0] * a[1], a[0].sin()], 2, 2, lo=[-1, -1], hi=[1, 1])
    J = m.jacobian(np.array([0.5, 0.25]))
    np.testing.assert_allclose(J, [[0.25, 0.5], [np.cos(0.5), 0.0]], atol=1e-14)
    with pytest.raises(DomainBoxError):
        m.value(np.array([1.5, 0.0]))
    with pytest.raises(DomainBoxError):
        m.jet(np.array([0.0, -2.0]), 2)


def test_curve_derivative_sin():
    est = curve_derivative(lambda t: np.sin(t), 1)
    assert est.mode == "jet" and est.error == 0.0
    assert est.value == pytest.approx(1.0, abs=1e-14)


def test_curve_derivative_cubic():
    est = curve_derivative(lambda t: t * t * t, 3)
    assert est.value == pytest.approx(6.0, abs=1e-12)


def test_richardson_exp_curve():
    est = curve_derivative(lambda t: np.exp(2.0 * t), 3, mode="richardson")
    assert est.converged
    assert est.error < 1e-8
    assert est.value == pytest.approx(8.0, abs=1e-7)


def test_jet_and_richardson_agree_on_smooth_curve():
    def c(t):
        return np.sin(3.0 * t) * np.exp(-t)

    for k in range(1, 5):
        a = curve_derivative(c, k, mode="jet")
        b = curve_derivative(c, k, mode="richardson")
        assert abs(a.value - b.value) < 1e-5 * max(1.0, abs(a.value)), k


def test_mixed_partial_examples():
    assert mixed_partial(lambda t, s: t * s, 1, 1).value == pytest.approx(1.0)
    assert mixed_partial(lambda t, s: t * t * s, 2, 1).value == pytest.approx(2.0)
    est = mixed_partial(lambda t, s: np.sin(t) * np.sin(s), 1, 1, mode="richardson")
    assert est.value == pytest.approx(1.0, abs=1e-8)
    jm = mixed_partial(lambda t, s: np.sin(t) * np.sin(s), 3, 2)
    # d3/dt3 sin t = -cos t -> -1; d2/ds2 sin s = -sin s -> 0 at 0
    assert jm.value == pytest.approx(0.0, abs=1e-14)


def test_vector_valued_curve_derivative():
    est = curve_derivative(lambda t: [t * t, 3.0 * t, t.sin() if isinstance(t, Jet) else np.sin(t)], 2)
    np.testing.assert_allclose(est.value, [2.0, 0.0, 0.0], atol=1e-14)


def test_fornberg_weights_reproduce_classic_stencils():
    w = finite_difference_weights(1, np.array([-1.0, 0.0, 1.0]))
    np.testing.assert_allclose(w, [-0.5, 0.0, 0.5], atol=1e-14)
    w = finite_difference_weights(2, np.array([-1.0, 0.0, 1.0]))
    np.testing.assert_allclose(w, [1.0, -2.0, 1.0], atol=1e-13)


def test_richardson_extrapolate_kills_h2_error():
    steps = (0.1, 0.05, 0.025, 0.0125)
    # D(h) = 5 + 3 h^2 + 0.2 h^4
    vals = [5.0 + 3.0 * h ** 2 + 0.2 * h ** 4 for h in steps]
    limit, err = richardson_extrapolate(list(vals), steps)
    assert limit == pytest.approx(5.0, abs=1e-12)
    assert err < 1e-9


def test_spaces_are_cached():
    assert jet_space(2, 3) is jet_space(2, 3)
    assert grouped_space(((2, 1), (2, 3))) is grouped_space(((2, 1), (2, 3)))
