import math

import numpy as np
import pytest

from twistwalk.group import (
    Angle,
    CocycleDataError,
    GroupElement,
    cocycle,
    contraction_threshold,
    g_inv,
    g_mul,
    identity,
    proj_c,
    scale,
)

TWO_PI = 2.0 * math.pi


def rand_element(rng, zmax=1.0):
    z = complex(rng.uniform(-zmax, zmax), rng.uniform(-zmax, zmax))
    return GroupElement(z, Angle(rng.uniform(0, TWO_PI)))


def close(a: GroupElement, b: GroupElement, tol=1e-12):
    dth = abs(a.theta.value - b.theta.value)
    dth = min(dth, TWO_PI - dth)
    return abs(a.z - b.z) <= tol and dth <= tol


class TestAngle:
    def test_canonical_range(self):
        for v in (-0.1, 7.0, 100.3, -100.3, TWO_PI, -1e-17, 0.0):
            a = Angle(v)
            assert 0.0 <= a.value < TWO_PI

    def test_rational_reduction(self):
        a = Angle.rational(4, 6)
        assert (a.p, a.q) == (2, 3)
        assert a.value == pytest.approx(TWO_PI * 2 / 3, rel=1e-15)
        assert Angle.rational(-1, 3).p == 2
        assert Angle.rational(7, 3).p == 1

    def test_rational_arithmetic_exact(self):
        a = Angle.rational(1, 3)
        b = Angle.rational(1, 6)
        assert ((a + b).p, (a + b).q) == (1, 2)
        assert (-a).p == 2 and (-a).q == 3
        assert a.times(5).p == 2  # 5/3 mod 1 = 2/3
        assert a.times(3).value == 0.0

    def test_mixing_drops_exactness(self):
        assert not (Angle.rational(1, 3) + Angle(0.1)).is_rational

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            Angle(float("nan"))
        with pytest.raises(ValueError):
            Angle.rational(1, 0)


class TestProduct:
    def test_identity_on_displacement(self):
        beta = Angle(1.3)
        out = g_mul(GroupElement(0j, beta), GroupElement(0j, Angle(0.0)))
        assert close(out, GroupElement(0j, beta))

    def test_quarter_turn(self):
        out = g_mul(GroupElement(1 + 0j, Angle(math.pi / 2)), GroupElement(1 + 0j, Angle(0.0)))
        assert close(out, GroupElement(1 + 1j, Angle(math.pi / 2)))

    def test_worked_product(self):
        a = GroupElement(2 + 1j, Angle(math.pi))
        b = GroupElement(1 - 1j, Angle(math.pi / 2))
        # direct complex arithmetic: 2+i + e^{i pi}(1-i) = 1+2i, angles add
        assert close(g_mul(a, b), GroupElement(1 + 2j, Angle(3 * math.pi / 2)), tol=1e-14)

    def test_associativity_randomized(self):
        rng = np.random.default_rng(7)
        for _ in range(300):
            a, b, c = (rand_element(rng, zmax=1e3) for _ in range(3))
            lhs = g_mul(g_mul(a, b), c)
            rhs = g_mul(a, g_mul(b, c))
            assert abs(lhs.z - rhs.z) < 1e-12 * max(1.0, abs(lhs.z))
            d = abs(lhs.theta.value - rhs.theta.value)
            assert min(d, TWO_PI - d) < 1e-12

    def test_nonfinite_displacement_rejected(self):
        with pytest.raises(ValueError):
            GroupElement(complex("inf"), Angle(0.0))


class TestInverse:
    def test_examples(self):
        assert close(g_inv(identity()), identity())
        assert close(g_inv(GroupElement(1 + 0j, Angle(0.0))), GroupElement(-1 + 0j, Angle(0.0)))
        got = g_inv(GroupElement(1j, Angle(math.pi / 2)))
        assert close(got, GroupElement(-1 + 0j, Angle(3 * math.pi / 2)), tol=1e-15)

    def test_two_sided_inverse_randomized(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            g = rand_element(rng, zmax=50.0)
            assert close(g_mul(g, g_inv(g)), identity(), tol=1e-11)
            assert close(g_mul(g_inv(g), g), identity(), tol=1e-11)


class TestScale:
    def test_examples(self):
        g = GroupElement(4 + 2j, Angle(0.7))
        assert close(scale(1.0, g), g)
        assert close(scale(0.5, g), GroupElement(2 + 1j, Angle(0.7)))

    def test_one_parameter_group_law(self):
        g = GroupElement(1 - 1j, Angle(1.0))
        assert close(scale(0.3, scale(7.0, g)), scale(2.1, g), tol=1e-14)

    def test_nonpositive_rejected(self):
        for eta in (0.0, -1.0):
            with pytest.raises(ValueError):
                scale(eta, identity())

    def test_homomorphism_randomized(self):
        rng = np.random.default_rng(13)
        for _ in range(200):
            a, b = rand_element(rng, 10.0), rand_element(rng, 10.0)
            eta = float(rng.uniform(0.01, 5.0))
            lhs = scale(eta, g_mul(a, b))
            rhs = g_mul(scale(eta, a), scale(eta, b))
            assert close(lhs, rhs, tol=1e-12)

    def test_haar_rectangle_scaling(self):
        # axis-aligned rectangle with corners as displacements: the image
        # under scale(eta, .) has area eta^2 times the original, computed
        # analytically from the mapped corners
        rng = np.random.default_rng(17)
        for _ in range(50):
            x0, y0 = rng.uniform(-3, 3, 2)
            w, h = rng.uniform(0.1, 2.0, 2)
            eta = float(rng.uniform(0.1, 4.0))
            corners = [x0 + 1j * y0, (x0 + w) + 1j * (y0 + h)]
            mapped = [scale(eta, GroupElement(c, Angle(0.0))).z for c in corners]
            area0 = w * h
            area1 = (mapped[1].real - mapped[0].real) * (mapped[1].imag - mapped[0].imag)
            assert area1 == pytest.approx(eta ** 2 * area0, rel=1e-12)

    def test_contraction(self):
        rng = np.random.default_rng(19)
        elems = [rand_element(rng, 100.0) for _ in range(64)]
        for eps in (1.0, 1e-3, 1e-9):
            thr = contraction_threshold(elems, eps)
            eta = 0.999 * thr
            assert all(abs(proj_c(scale(eta, g))) < eps for g in elems)


class TestProjection:
    def test_examples(self):
        assert proj_c(GroupElement(0j, Angle(2.0))) == 0j
        assert proj_c(GroupElement(1 + 1j, Angle(math.pi))) == 1 + 1j

    def test_product_projection_algebra(self):
        rng = np.random.default_rng(23)
        for _ in range(100):
            a, b = rand_element(rng, 5.0), rand_element(rng, 5.0)
            expect = a.z + complex(math.cos(a.theta.value), math.sin(a.theta.value)) * b.z
            assert abs(proj_c(g_mul(a, b)) - expect) < 1e-13


class TestCocycle:
    def test_zero_is_identity(self):
        assert close(cocycle([], 0), identity())

    def test_constant_twist_matches_walk(self):
        # increments (X_k, beta): the product telescopes to (S_n, n beta)
        rng = np.random.default_rng(29)
        beta = Angle(0.9)
        xs = rng.standard_normal(40) + 1j * rng.standard_normal(40)
        seq = [GroupElement(z, beta) for z in xs]
        s = 0j
        for n in range(1, 41):
            s = complex(math.cos(0.9), math.sin(0.9)) * s + xs[n - 1]
            got = cocycle(seq, n)
            assert abs(got.z - s) < 1e-12 * max(1.0, abs(s))
            d = abs(got.theta.value - Angle(n * 0.9).value)
            assert min(d, TWO_PI - d) < 1e-9

    def test_identity_at_3_2(self):
        rng = np.random.default_rng(31)
        seq = [rand_element(rng) for _ in range(5)]
        lhs = cocycle(seq, 5)
        rhs = g_mul(cocycle(seq, 3, start=2), cocycle(seq, 2))
        assert close(lhs, rhs, tol=1e-13)

    def test_identity_property_all_small_windows(self):
        rng = np.random.default_rng(37)
        seq = {k: rand_element(rng) for k in range(-70, 70)}
        for _ in range(150):
            n = int(rng.integers(-32, 33))
            m = int(rng.integers(-32, 33))
            lhs = cocycle(seq, n + m)
            rhs = g_mul(cocycle(seq, n, start=m), cocycle(seq, m))
            assert abs(lhs.z - rhs.z) <= 1e-10 * max(1.0, abs(lhs.z))
            d = abs(lhs.theta.value - rhs.theta.value)
            assert min(d, TWO_PI - d) < 1e-10

    def test_negative_window_is_inverse_of_shifted_product(self):
        rng = np.random.default_rng(41)
        seq = {k: rand_element(rng) for k in range(-6, 1)}
        got = cocycle(seq, -6)
        fwd = cocycle(seq, 6, start=-6)
        assert close(got, g_inv(fwd))

    def test_missing_index_signals_insufficient_data(self):
        seq = [identity()] * 3
        with pytest.raises(CocycleDataError):
            cocycle(seq, 4)
        with pytest.raises(CocycleDataError):
            cocycle(seq, -1)  # list would silently wrap
        with pytest.raises(CocycleDataError):
            cocycle({0: identity()}, 2)
