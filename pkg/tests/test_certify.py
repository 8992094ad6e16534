"""Unit tests for the exact-arithmetic certification pipeline."""

from fractions import Fraction

import numpy as np
import pytest

from rkstab.certify import (
    NO_NEGATIVE_ANCHOR,
    NON_POSITIVE_MATCH_COEFFICIENT,
    ORDER_GAP_EXCEEDS_ONE,
    CertBound,
    CertFailure,
    CrossForm,
    LPolynomial,
    ReductionResult,
    cauchy_schwarz_bound,
    certify,
    compose_polynomial,
    drop_adjacent_positive,
    energy_pair,
    expand_cross,
    idea1_reduce,
    isolate_positive_root,
    rk4_family_report,
)
from rkstab.errors import Inconsistent, NoSignChange
from rkstab.tableaux import StabilityPolynomial, builtin_tableau, stability_polynomial

F = Fraction

# Common denominator of the ten-stage cross form; multiplying by it turns
# every coefficient into the integers of the printed expansion.
TEN_STAGE_SCALE = 63474972917760000

# Bound-polynomial integers for the ten-stage method, constant term first.
TEN_STAGE_BOUND = [
    -19591041024000,
    22529697177600,
    6312668774400,
    4406472576000,
    631115712000,
    161621049600,
    11089664640,
    493698240,
    117858240,
    4101840,
    1902240,
    20520,
    4284,
    0,
    1,
]


def poly(*coeffs) -> StabilityPolynomial:
    return StabilityPolynomial(tuple(F(c) for c in coeffs))


def lp(d: dict) -> LPolynomial:
    return LPolynomial({k: F(v) for k, v in d.items()})


# ---------------------------------------------------------------------------
# LPolynomial value semantics


def test_lpolynomial_strips_zeros_and_orders():
    p = lp({0: 0, 1: 1, 3: "1/6"})
    assert p.ord == 1 and p.degree == 3
    assert p[0] == 0 and p[3] == F(1, 6)
    assert list(p.terms()) == [(1, F(1)), (3, F(1, 6))]


def test_lpolynomial_arithmetic():
    a, b = lp({1: 1, 2: "1/2"}), lp({1: 1})
    assert (a - b) == lp({2: "1/2"})
    assert (a - a).is_zero
    assert a.scale(2) == lp({1: 2, 2: 1})
    assert a.shift(-1) == lp({0: 1, 1: "1/2"})


def test_lpolynomial_zero_has_no_order():
    with pytest.raises(ValueError):
        _ = lp({}).ord


# ---------------------------------------------------------------------------
# energy_pair


def test_energy_pair_euler():
    left, right = energy_pair(poly(1, 1))
    assert left == lp({1: 1})
    assert right == lp({0: 2, 1: 1})


def test_energy_pair_second_order():
    left, right = energy_pair(poly(1, 1, "1/2"))
    assert left == lp({1: 1, 2: "1/2"})
    assert right == lp({0: 2, 1: 1, 2: "1/2"})


def test_energy_pair_identity_method():
    left, right = energy_pair(poly(1))
    assert left.is_zero
    assert right == lp({0: 2})


def test_energy_pair_inconsistent():
    with pytest.raises(Inconsistent):
        energy_pair(poly(2, 1))


# ---------------------------------------------------------------------------
# idea1_reduce


def test_reduce_ssprk33_matches_hand_computation():
    left, right = energy_pair(poly(1, 1, "1/2", "1/6"))
    res = idea1_reduce(left, right)
    assert isinstance(res, ReductionResult)
    assert res.left == lp({2: "-1/2", 3: "1/6"})
    assert res.right == lp({2: "1/6", 3: "1/6"})
    factors = [s.dropped_factor for s in res.trace.steps]
    assert factors == [F(2), F(6)]
    assert [s.side for s in res.trace.steps] == ["right", "left"]


def test_reduce_euler_single_drop():
    left, right = energy_pair(poly(1, 1))
    res = idea1_reduce(left, right)
    assert isinstance(res, ReductionResult)
    assert res.left == lp({1: 1}) and res.right == lp({1: 1})
    assert [s.dropped_factor for s in res.trace.steps] == [F(2)]


def test_reduce_equal_orders_is_identity():
    a, b = lp({1: 1, 2: 1}), lp({1: 3})
    res = idea1_reduce(a, b)
    assert isinstance(res, ReductionResult)
    assert res.left == a and res.right == b
    assert res.trace.steps == ()


def test_reduce_rk44_fails_non_positive_match():
    left, right = energy_pair(stability_polynomial(builtin_tableau("rk44_classic")))
    res = idea1_reduce(left, right)
    assert isinstance(res, CertFailure)
    assert res.reason == NON_POSITIVE_MATCH_COEFFICIENT
    assert res.state_at_failure is not None


def _replay_trace(P: StabilityPolynomial):
    """Re-apply a reduction trace step by step, checking reconstruction."""
    left, right = energy_pair(P)
    res = idea1_reduce(left, right)
    assert isinstance(res, ReductionResult)
    current = {"left": left, "right": right}
    previous_order = -1
    for step in res.trace.steps:
        assert step.dropped_factor > 0
        pre_split = current[step.side]
        assert step.matched_polynomial + step.remainder == pre_split
        assert step.remainder.is_zero or step.remainder.ord > pre_split.ord
        assert pre_split.ord > previous_order
        previous_order = pre_split.ord
        current[step.side] = step.remainder
    assert current["left"] == res.left and current["right"] == res.right
    assert len(res.trace.steps) <= 2 * P.degree
    return res


@pytest.mark.parametrize("name", ["explicit_euler", "ssprk22", "ssprk33", "ssprk104"])
def test_trace_validity_builtin_methods(name):
    _replay_trace(stability_polynomial(builtin_tableau(name)))


# ---------------------------------------------------------------------------
# expand_cross / drop_adjacent_positive


def test_expand_cross_diagonal():
    form = expand_cross(lp({1: 1}), lp({1: 1}))
    assert form.entries == {(1, 1): F(1)}


def test_expand_cross_ssprk33_reduced_pair():
    form = expand_cross(lp({2: "-1/2", 3: "1/6"}), lp({2: "1/6", 3: "1/6"}))
    assert form.entries == {
        (2, 2): F(-1, 12),
        (2, 3): F(-1, 18),
        (3, 3): F(1, 36),
    }


def test_drop_adjacent_positive_rules():
    kept = drop_adjacent_positive(
        CrossForm({(7, 8): F(16254000), (6, 8): F(51308640), (3, 4): F(-5)})
    )
    assert (7, 8) not in kept.entries
    assert kept.entries[(6, 8)] == F(51308640)
    assert kept.entries[(3, 4)] == F(-5)


def test_ten_stage_expansion_exact_integers():
    left, right = energy_pair(stability_polynomial(builtin_tableau("ssprk104")))
    res = idea1_reduce(left, right)
    assert isinstance(res, ReductionResult)
    form = expand_cross(res.left, res.right)
    scaled = {key: c * TEN_STAGE_SCALE for key, c in form.entries.items()}
    assert all(v.denominator == 1 for v in scaled.values())
    assert scaled[(3, 3)] == -19591041024000
    assert scaled[(3, 4)] == -22529697177600
    assert scaled[(4, 4)] == -6312668774400
    assert scaled[(5, 5)] == -398320934400
    assert scaled[(6, 6)] == -4555958400
    assert scaled[(7, 8)] == 16254000
    after = drop_adjacent_positive(form)
    assert (7, 8) not in after.entries
    assert after.entries[(6, 8)] * TEN_STAGE_SCALE == 51308640


# ---------------------------------------------------------------------------
# cauchy_schwarz_bound and root isolation


def test_isolate_root_exact_hit():
    interval = isolate_positive_root((F(-4), F(0), F(1)))
    assert interval.lo == interval.hi == F(2)


def test_isolate_root_bracket_and_tolerance():
    interval = isolate_positive_root((F(-2), F(0), F(1)), tol=F(1, 10 ** 9))
    assert interval.hi - interval.lo <= F(1, 10 ** 9)
    assert interval.lo ** 2 < 2 < interval.hi ** 2
    assert abs(interval.approx - 2 ** 0.5) < 1e-9


def test_isolate_root_no_sign_change():
    with pytest.raises(NoSignChange, match="unconditionally stable"):
        isolate_positive_root((F(-1),))


def test_bound_ssprk33_general_root_exact():
    form = CrossForm({(2, 2): F(-1, 12), (2, 3): F(-1, 18), (3, 3): F(1, 36)})
    out = cauchy_schwarz_bound(form)
    assert isinstance(out, CertBound)
    assert out.anchor_order == 2
    assert out.bound_poly == (F(-1, 12), F(1, 18), F(1, 36))
    assert out.root.lo == out.root.hi == F(1)


def test_bound_ssprk33_skew_root_sqrt3():
    form = CrossForm({(2, 2): F(-1, 12), (2, 3): F(-1, 18), (3, 3): F(1, 36)})
    out = cauchy_schwarz_bound(form, mode="skew", tol=F(1, 10 ** 11))
    assert isinstance(out, CertBound)
    assert out.bound_poly == (F(-1, 12), F(0), F(1, 36))
    assert abs(out.root.approx - 3 ** 0.5) <= 1e-10


def test_bound_requires_negative_anchor():
    out = cauchy_schwarz_bound(CrossForm({(1, 1): F(1)}))
    assert isinstance(out, CertFailure)
    assert out.reason == NO_NEGATIVE_ANCHOR


def test_bound_retains_negative_diagonals():
    form = CrossForm({(2, 2): F(-1), (3, 3): F(-5), (2, 4): F(2)})
    out = cauchy_schwarz_bound(form)
    assert isinstance(out, CertBound)
    assert out.retained_negatives == {3: F(-5)}
    assert out.bound_poly == (F(-1), F(0), F(2))


def test_bound_pure_slack_is_unconditional():
    with pytest.raises(NoSignChange):
        cauchy_schwarz_bound(CrossForm({(2, 2): F(-1)}))


# ---------------------------------------------------------------------------
# certify: full pipeline


def test_certify_euler_fails_no_negative_anchor():
    out = certify(poly(1, 1), method="explicit_euler")
    assert isinstance(out, CertFailure)
    assert out.reason == NO_NEGATIVE_ANCHOR
    assert out.state_at_failure == (lp({1: 1}), lp({1: 1}))


def test_certify_ssprk22_fails_no_negative_anchor():
    out = certify(poly(1, 1, "1/2"))
    assert isinstance(out, CertFailure)
    assert out.reason == NO_NEGATIVE_ANCHOR


def test_certify_ssprk33_general_exact_one():
    out = certify(stability_polynomial(builtin_tableau("ssprk33")))
    assert isinstance(out, CertBound)
    assert out.root.lo == out.root.hi == F(1)


def test_certify_ssprk33_skew_sqrt3():
    out = certify(
        stability_polynomial(builtin_tableau("ssprk33")),
        mode="skew",
        tol=F(1, 10 ** 10),
    )
    assert isinstance(out, CertBound)
    assert abs(out.root.approx - 3 ** 0.5) <= 1e-9


def test_certify_ssprk104_general_bound_and_root():
    out = certify(stability_polynomial(builtin_tableau("ssprk104")))
    assert isinstance(out, CertBound)
    assert out.anchor_order == 3
    scaled = [c * TEN_STAGE_SCALE for c in out.bound_poly]
    assert scaled == TEN_STAGE_BOUND
    assert 0.674925 <= out.root.approx <= 0.674935


def test_certify_ssprk104_skew_root():
    out = certify(stability_polynomial(builtin_tableau("ssprk104")), mode="skew")
    assert isinstance(out, CertBound)
    assert abs(out.root.approx - 1.5708541491) <= 1e-5


def test_certify_rk44_fails():
    out = certify(
        stability_polynomial(builtin_tableau("rk44_classic")), method="rk44_classic"
    )
    assert isinstance(out, CertFailure)
    assert out.reason == NON_POSITIVE_MATCH_COEFFICIENT
    assert out.method == "rk44_classic"


# ---------------------------------------------------------------------------
# composition and the rk4 family


def test_compose_square_of_euler():
    squared = compose_polynomial(poly(1, 1), 2)
    assert squared.coeffs == (F(1), F(2), F(1))


def test_compose_rk44_squared_top_coefficient():
    squared = compose_polynomial(
        stability_polynomial(builtin_tableau("rk44_classic")), 2
    )
    assert squared.degree == 8
    assert squared.coeffs[8] == F(1, 576)


def test_certify_rk44_squared_succeeds():
    squared = compose_polynomial(
        stability_polynomial(builtin_tableau("rk44_classic")), 2
    )
    out = certify(squared)
    assert isinstance(out, CertBound)
    assert abs(out.root.approx - 0.34577288888) <= 1e-5


def test_compose_rejects_nonpositive_n():
    with pytest.raises(ValueError):
        compose_polynomial(poly(1, 1), 0)


def test_rk4_family_zero_coefficients_fail():
    out = rk4_family_report(0, 0)
    assert isinstance(out, CertFailure)
    assert out.reason == NON_POSITIVE_MATCH_COEFFICIENT
    assert out.method == "rk4family:0,0"


def test_rk4_family_one_288_still_negative_remainder():
    # 288 * (1/288) - 2 = -1 < 0: the match coefficient stays non-positive.
    out = rk4_family_report(F(1, 288), 0)
    assert isinstance(out, CertFailure)
    assert out.reason == NON_POSITIVE_MATCH_COEFFICIENT


def test_rk4_family_boundary_vanishing_remainder():
    # 288 * (1/144) - 2 = 0: the order-2 term cancels exactly, leaving an
    # order gap of two.
    out = rk4_family_report(F(1, 144), 0)
    assert isinstance(out, CertFailure)
    assert out.reason == ORDER_GAP_EXCEEDS_ONE


def test_rk4_family_ten_stage_coefficients_agree_with_truncation():
    family = rk4_family_report(F(17, 2160), F(7, 6480))
    assert isinstance(family, CertBound)
    truncated = certify(
        poly(1, 1, "1/2", "1/6", "1/24", "17/2160", "7/6480")
    )
    assert isinstance(truncated, CertBound)
    assert family.bound_poly == truncated.bound_poly
    assert family.root == truncated.root
    assert abs(family.root.approx - 0.81658322682) <= 1e-5


# ---------------------------------------------------------------------------
# numerical soundness of certificates


def _matrix_polynomial(P: StabilityPolynomial, Z: np.ndarray) -> np.ndarray:
    acc = np.zeros_like(Z)
    for c in reversed(P.coeffs):
        acc = acc @ Z
        acc += float(c) * np.eye(Z.shape[0])
    return acc


def _random_semibounded(rng, dim):
    skew = rng.standard_normal((dim, dim))
    skew = skew - skew.T
    b = rng.standard_normal((dim, dim))
    return skew - b @ b.T


def _soundness_sweep(P, bound, rng, operators, mode="general"):
    worst = -np.inf
    for _ in range(operators):
        dim = int(rng.integers(2, 9))
        if mode == "skew":
            mat = rng.standard_normal((dim, dim))
            mat = mat - mat.T
        else:
            mat = _random_semibounded(rng, dim)
        norm = np.linalg.svd(mat, compute_uv=False)[0]
        if norm == 0:
            continue
        step = _matrix_polynomial(P, (bound / norm) * mat)
        states = rng.standard_normal((dim, 100))
        growth = np.linalg.norm(step @ states, axis=0) - np.linalg.norm(
            states, axis=0
        )
        worst = max(worst, float(growth.max()))
    return worst


def test_soundness_quick_ssprk33_general():
    P = stability_polynomial(builtin_tableau("ssprk33"))
    out = certify(P)
    rng = np.random.default_rng(101)
    worst = _soundness_sweep(P, float(out.root.lo), rng, operators=25)
    assert worst <= 1e-12


def test_soundness_quick_ssprk104_general():
    P = stability_polynomial(builtin_tableau("ssprk104"))
    out = certify(P)
    rng = np.random.default_rng(202)
    worst = _soundness_sweep(P, float(out.root.lo), rng, operators=25)
    assert worst <= 1e-12


def test_soundness_quick_ssprk33_skew():
    P = stability_polynomial(builtin_tableau("ssprk33"))
    out = certify(P, mode="skew", tol=F(1, 10 ** 10))
    rng = np.random.default_rng(303)
    worst = _soundness_sweep(P, float(out.root.lo), rng, operators=25, mode="skew")
    assert worst <= 1e-12


def test_skew_products_with_odd_total_power_vanish():
    # Validates the skew-mode deletion rule numerically.
    rng = np.random.default_rng(404)
    for _ in range(20):
        dim = int(rng.integers(2, 7))
        mat = rng.standard_normal((dim, dim))
        mat = mat - mat.T
        norm = np.linalg.svd(mat, compute_uv=False)[0]
        u = rng.standard_normal(dim)
        powers = [u]
        for _ in range(7):
            powers.append(mat @ powers[-1])
        for i in range(8):
            for j in range(i, 8):
                if (i + j) % 2 == 1:
                    value = float(np.dot(powers[i], powers[j]))
                    scale = float(np.dot(u, u)) * norm ** (i + j)
                    assert abs(value) <= 1e-12 * max(scale, 1e-300)


def test_skew_root_never_below_general_root():
    cases = [
        stability_polynomial(builtin_tableau("ssprk33")),
        stability_polynomial(builtin_tableau("ssprk104")),
        compose_polynomial(stability_polynomial(builtin_tableau("rk44_classic")), 2),
    ]
    for P in cases:
        general = certify(P)
        skew = certify(P, mode="skew")
        assert isinstance(general, CertBound) and isinstance(skew, CertBound)
        assert skew.root.lo >= general.root.lo


# ---------------------------------------------------------------------------
# serialization


def test_cert_bound_jsonable():
    out = certify(stability_polynomial(builtin_tableau("ssprk33")), method="ssprk33")
    doc = out.to_jsonable()
    assert doc["result"] == "certified"
    assert doc["method"] == "ssprk33"
    assert doc["root"]["lo"] == "1"
    assert doc["bound_poly"][0] == "-1/12"
    assert doc["trace"][0]["dropped_factor"] == "2"


def test_cert_failure_jsonable():
    out = certify(poly(1, 1), method="explicit_euler")
    doc = out.to_jsonable()
    assert doc["result"] == "failure"
    assert doc["reason"] == NO_NEGATIVE_ANCHOR
    assert doc["state_at_failure"] == [[[1, "1"]], [[1, "1"]]]
