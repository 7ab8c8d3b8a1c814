import math

import pytest

from bilap.checks import Z_LADDER, identity_suites, regular_part_table, singular_part_checks
from bilap.fixtures import FIXTURES, get_fixture


def test_singular_limits():
    rows = singular_part_checks()
    assert [r["target"] for r in rows] == [math.pi / 4, math.pi / 8, 1 / 16]
    assert all(r["passed"] for r in rows)


def test_singular_limits_fail_when_far():
    # at z = -0.5 the leading term is nowhere near its limit
    assert not all(r["passed"] for r in singular_part_checks(z=-0.5))


def test_regular_parts_settle():
    rows = regular_part_table(ms=(0, 3, 7))
    assert all(r["passed"] for r in rows)
    assert len(rows[0]["difference"]) == len(Z_LADDER)


def test_identity_suites_small():
    rows = identity_suites(samples=300, seed=5)
    assert {r["name"] for r in rows} == {"morse_quartic", "top_factorization", "planewave_stencil",
                                         "scaling_covariance"}
    assert all(r["passed"] and r["max_error"] <= 1e-12 for r in rows)


def test_identity_suites_deterministic():
    assert identity_suites(samples=100, seed=1) == identity_suites(samples=100, seed=1)


def test_fixture_lookup():
    fx = get_fixture("laplacian_d3")
    assert (fx.d, fx.n_o, fx.k_bottom) == (3, 2, 7)
    assert set(FIXTURES) >= {f"delta_d{d}" for d in range(1, 6)}
    with pytest.raises(Exception):
        get_fixture("nope")
