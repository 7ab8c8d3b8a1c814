import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bilap.core_model import (GeneratorPotential, bilaplacian_generator_1d, delta_generator,
                              dispersion_eval, laplacian_generator, top_vanishing_generator, v_sq_eval)
from bilap.errors import DomainError, NonFiniteSample, NotConverged, NoConvergence, SizeExceeded
from bilap.quadrature import (EdgeSplitQuadrature, TorusGrid, divergence_verdict, integrate_torus,
                              integrate_torus_adaptive, jm_integral, jm_singular_part, pairwise_sum,
                              radial_limit, sphere_area, sphere_integrate, sphere_rule,
                              vanishing_order_exact)

GAMMA = 1 / math.sqrt(2)


def mp_moment_d1(z, p, top_offset=None):
    """Independent oracle: d=1 moment of the delta generator by mpmath."""
    mp.mp.dps = 30
    if top_offset is not None:
        f = lambda q: 1 / ((1 - mp.cos(q)) ** 2 - 4 - mp.mpf(top_offset)) ** p
        pts = [0, mp.pi - 0.5, mp.pi - 1e-3, mp.pi]
    else:
        f = lambda q: 1 / ((1 - mp.cos(q)) ** 2 - mp.mpf(z)) ** p
        w = float(abs(z)) ** 0.25
        pts = [0, w / 10, w, 10 * w, 0.5, mp.pi] if w < 0.05 else [0, 0.5, mp.pi]
    # integrand is even in q: twice the half-interval, times |v|^2 = 1/(2 pi)
    return float(2 * mp.quad(f, pts) / (2 * mp.pi))


class TestTorusGrid:
    def test_constant(self):
        assert integrate_torus(lambda q: np.ones(len(q)), TorusGrid(2, 8)) == pytest.approx(
            (2 * math.pi) ** 2, rel=1e-15)

    def test_cosine_exact(self):
        assert abs(integrate_torus(lambda q: np.cos(q[:, 0]), TorusGrid(1, 16))) < 1e-14

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 3), st.sampled_from([8, 12, 16]), st.data())
    def test_trig_monomials_exact(self, d, N, data):
        k = data.draw(st.lists(st.integers(0, N - 1), min_size=d, max_size=d))
        val = integrate_torus(lambda q: np.prod(np.cos(np.array(k) * q), axis=1), TorusGrid(d, N))
        exact = (2 * math.pi) ** d if all(x == 0 for x in k) else 0.0
        assert abs(val - exact) <= 1e-13 * (2 * math.pi) ** d

    def test_no_node_on_extremum(self):
        ax = TorusGrid(1, 16).axis()
        assert np.min(np.abs(ax)) > 0.1 and np.min(np.abs(ax + math.pi)) > 0.1

    def test_size_cap(self):
        with pytest.raises(SizeExceeded):
            TorusGrid(4, 128)
        TorusGrid(4, 128, symmetric=True)     # the wedge is small enough

    def test_symmetric_matches_full(self):
        gen = laplacian_generator(3)
        f = lambda q: v_sq_eval(gen, q) / (dispersion_eval(q) + 0.3)
        full = integrate_torus(f, TorusGrid(3, 16))
        wedge = integrate_torus(f, TorusGrid(3, 16, symmetric=True))
        assert wedge == pytest.approx(full, rel=1e-13)

    def test_non_finite(self):
        with pytest.raises(NonFiniteSample) as exc, np.errstate(divide="ignore"):
            integrate_torus(lambda q: 1 / (q[:, 0] - q[0, 0]), TorusGrid(1, 8))
        assert exc.value.index == 0

    def test_deterministic(self):
        f = lambda q: np.exp(np.sin(q).sum(axis=1))
        a = integrate_torus(f, TorusGrid(3, 24))
        b = integrate_torus(f, TorusGrid(3, 24))
        assert a == b

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=300))
    def test_pairwise_sum(self, xs):
        assert pairwise_sum(np.array(xs)) == pytest.approx(math.fsum(xs), abs=1e-9)


class TestAdaptive:
    def test_smooth_converges(self):
        f = lambda q: 1 / (dispersion_eval(q) + 1)
        est = integrate_torus_adaptive(f, 1, 1e-10, 1024)
        assert est.converged and est.error_estimate <= 1e-10 * (1 + est.value)

    def test_divergent_raises(self):
        gen = delta_generator(3)
        f = lambda q: v_sq_eval(gen, q) / dispersion_eval(q)
        with pytest.raises(NotConverged) as exc:
            integrate_torus_adaptive(f, 3, 1e-6, 64)
        assert exc.value.estimate.value > integrate_torus(f, TorusGrid(3, 16))


class TestSphere:
    @pytest.mark.parametrize("d", [1, 2, 3, 4, 5])
    def test_area(self, d):
        assert sphere_integrate(lambda w: np.ones(len(w)), d) == pytest.approx(sphere_area(d), rel=1e-12)

    def test_examples(self):
        assert sphere_integrate(lambda w: np.ones(len(w)), 2) == pytest.approx(2 * math.pi, rel=1e-14)
        assert sphere_integrate(lambda w: np.ones(len(w)), 3) == pytest.approx(4 * math.pi, rel=1e-14)
        assert sphere_integrate(lambda w: w[:, 0] ** 2, 2) == pytest.approx(math.pi, rel=1e-14)

    @pytest.mark.parametrize("d", [2, 3, 4, 5])
    def test_second_and_fourth_moments(self, d):
        area = sphere_area(d)
        assert sphere_integrate(lambda w: w[:, -1] ** 2, d) == pytest.approx(area / d, rel=1e-12)
        assert sphere_integrate(lambda w: w[:, 0] ** 4, d) == pytest.approx(3 * area / (d * (d + 2)), rel=1e-12)

    def test_points_on_sphere(self):
        pts, _ = sphere_rule(4, 6)
        assert np.allclose(np.linalg.norm(pts, axis=1), 1.0)


class TestRadialLimit:
    def test_examples(self):
        assert radial_limit(lambda t: t ** 2, 2) == pytest.approx(1.0, rel=1e-12)
        assert radial_limit(lambda t: t ** 2 + t ** 4, 2) == pytest.approx(1.0, rel=1e-10)
        gen = delta_generator(3)
        val = radial_limit(lambda t: v_sq_eval(gen, t * np.array([0.6, 0.0, 0.8])), 0)
        assert val == pytest.approx((2 * math.pi) ** -3, rel=1e-12)

    def test_cosine(self):
        assert radial_limit(lambda t: 4 * math.sin(t / 2) ** 2, 2) == pytest.approx(1.0, rel=1e-10)

    def test_unsettled(self):
        with pytest.raises(NoConvergence):
            radial_limit(lambda t: math.log(t), 0)


class TestJm:
    def test_large_z(self):
        assert jm_integral(0, -1e6) == pytest.approx(GAMMA / 1e6, rel=1e-2)

    def test_m3_closed_form(self):
        assert jm_integral(3, -1.0) == pytest.approx(math.log(2) / 16, rel=1e-13)

    @pytest.mark.parametrize("m", range(8))
    @pytest.mark.parametrize("z", [-1.0, -1e-3, -1e-7])
    def test_against_mpmath(self, m, z):
        mp.mp.dps = 30
        ref = mp.quad(lambda r: r ** m / (4 * r ** 4 - z), [0, abs(z) ** 0.25 / 2, abs(z) ** 0.25, GAMMA])
        assert jm_integral(m, z) == pytest.approx(float(ref), rel=1e-12)

    def test_singular_part_examples(self):
        assert jm_singular_part(0, -1.0) == pytest.approx(math.pi / 4, rel=1e-15)
        assert jm_singular_part(3, -1.0) == 0.0
        # m = 5: (z/4) * pi/8 * (-z)^{-1/2}
        assert jm_singular_part(5, -0.01) == pytest.approx(-0.00981748, abs=1e-8)

    @pytest.mark.parametrize("m", range(4, 12))
    def test_recursion(self, m):
        # j_m = (z/4) j_{m-4} + gamma^{m-3} / (4 (m-3)), which fixes the (z/4)^n factor
        z = -0.37
        rhs = z / 4 * jm_integral(m - 4, z) + GAMMA ** (m - 3) / (4 * (m - 3))
        assert jm_integral(m, z) == pytest.approx(rhs, rel=1e-12)

    @pytest.mark.parametrize("m", range(8))
    def test_regular_part_settles(self, m):
        zs = [-10.0 ** -j for j in (2, 4, 6, 8)]
        diffs = [jm_integral(m, z) - jm_singular_part(m, z) for z in zs]
        inc = np.abs(np.diff(diffs))
        assert np.all(inc[1:] <= inc[:-1] + 1e-12)

    def test_leading_singular_constants(self):
        z = -1e-8
        assert (-z) ** 0.75 * jm_integral(0, z) == pytest.approx(math.pi / 4, abs=1e-3)
        assert (-z) ** 0.5 * jm_integral(1, z) == pytest.approx(math.pi / 8, abs=1e-3)
        assert jm_integral(3, z) / -math.log(-z) == pytest.approx(1 / 16, abs=1e-3)

    def test_domain(self):
        with pytest.raises(DomainError):
            jm_integral(0, 0.1)
        with pytest.raises(DomainError):
            jm_singular_part(1, 0.0)


class TestVanishingOrder:
    @pytest.mark.parametrize("gen,bottom,top", [
        (delta_generator(2), 0, 0),
        (laplacian_generator(1), 2, 0),
        (laplacian_generator(3), 2, 0),
        (top_vanishing_generator(2), 0, 2),
        (bilaplacian_generator_1d(), 4, 0),
        (GeneratorPotential(1, [[1]], [1.0]), 0, 0),
    ])
    def test_orders(self, gen, bottom, top):
        assert vanishing_order_exact(gen, "bottom") == bottom
        assert vanishing_order_exact(gen, "top") == top


class TestDivergenceVerdict:
    def test_convergent_and_divergent(self):
        g5 = delta_generator(5)
        f5 = lambda q: v_sq_eval(g5, q) / dispersion_eval(q)
        assert divergence_verdict(f5, 5, [8, 16, 32], symmetric=True)["converges"]
        g3 = delta_generator(3)
        f3 = lambda q: v_sq_eval(g3, q) / dispersion_eval(q)
        assert not divergence_verdict(f3, 3, [16, 32, 64], symmetric=True)["converges"]

    def test_log_divergence(self):
        g4 = delta_generator(4)
        f4 = lambda q: v_sq_eval(g4, q) / dispersion_eval(q)
        assert not divergence_verdict(f4, 4, [8, 16, 32, 64], symmetric=True)["converges"]


@pytest.fixture(scope="module")
def esq1():
    return EdgeSplitQuadrature(delta_generator(1))


class TestEdgeSplit:
    @pytest.mark.parametrize("z", [-1.0, -1e-3, -1e-8, -1e-12, 5.0, -1e4])
    @pytest.mark.parametrize("p", [1, 2])
    def test_d1_against_mpmath(self, esq1, z, p):
        assert esq1.moment(z, p) == pytest.approx(mp_moment_d1(z, p), rel=1e-12)

    @pytest.mark.parametrize("alpha", [1e-8, 1e-3, 1.0])
    @pytest.mark.parametrize("p", [1, 2])
    def test_d1_top_against_mpmath(self, esq1, alpha, p):
        assert esq1.moment_top(alpha, p) == pytest.approx(mp_moment_d1(None, p, top_offset=alpha), rel=1e-12)

    @pytest.mark.parametrize("d", [1, 2, 3])
    def test_laplacian_exact_threshold_integral(self, d):
        # |v|^2 / e = 4 / (2 pi)^d identically, so M_1(0) = 4
        assert EdgeSplitQuadrature(laplacian_generator(d)).moment(0.0, 1) == pytest.approx(4.0, rel=1e-11)

    @pytest.mark.parametrize("d", [2, 3])
    def test_matches_plain_grid_away_from_band(self, d):
        gen = delta_generator(d)
        esq = EdgeSplitQuadrature(gen)
        plain = integrate_torus(lambda q: v_sq_eval(gen, q) / (dispersion_eval(q) + 1.0), TorusGrid(d, 64))
        assert esq.moment(-1.0, 1) == pytest.approx(plain, rel=1e-12)

    def test_divergent_edges(self, esq1):
        assert esq1.moment(0.0, 1) == math.inf
        assert esq1.moment_top(0.0, 1) == -math.inf

    def test_inside_band(self, esq1):
        with pytest.raises(DomainError):
            esq1.moment(1.0)

    def test_d5_threshold_integral(self):
        # frozen value; cross-checked by plain-grid Richardson in the acceptance suite
        esq = EdgeSplitQuadrature(delta_generator(5))
        assert esq.moment(0.0, 1) == pytest.approx(1 / 12.920287652250558, rel=1e-10)
