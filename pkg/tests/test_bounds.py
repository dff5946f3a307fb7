import math

import numpy as np
import pytest

from tailbounds import (
    BoundReport,
    DiscreteMeasure,
    PNormSpace,
    Sampler,
    banach_dual_bound,
    banach_mahalanobis_bound,
    build,
    chen,
    euclidean_chebyshev,
    grenander,
    invert,
    mc_tail,
    rao,
    scalar_chebyshev,
    second_moment,
    sweep,
)
from tailbounds.bounds import (
    EXACT_ENUMERATION,
    INEQUALITIES,
    MONTE_CARLO,
    report_to_row,
    rows_from_csv,
    rows_from_json,
    rows_to_csv,
    rows_to_json,
    sort_rows,
)
from tailbounds.errors import (
    ApplicabilityError,
    CenteringError,
    NotPositiveDefiniteError,
    RoleError,
    ShapeError,
)
from tailbounds.measure import GAUSSIAN, SYMMETRIC_ATOMS

from conftest import random_measure


def signs_measure(dim: int, p: float = 2.0, role: str = "primal") -> DiscreteMeasure:
    atoms = np.vstack([np.eye(dim), -np.eye(dim)])
    weights = np.full(2 * dim, 0.5 / dim)
    return DiscreteMeasure(PNormSpace(dim, p), atoms, weights, role)


def point_mass(dim: int, value: float = 0.0, p: float = 2.0) -> DiscreteMeasure:
    return DiscreteMeasure(PNormSpace(dim, p), [[value] * dim], [1.0])


def test_scalar_examples():
    fair = DiscreteMeasure(PNormSpace(1, 2.0), [[-1.0], [1.0]], [0.5, 0.5])
    r = scalar_chebyshev(fair, 1.0)
    assert (r.lhs, r.rhs) == (1.0, 1.0)
    assert r.holds and r.slack == 0.0

    p = scalar_chebyshev(point_mass(1, 7.0), 3.0)
    assert (p.lhs, p.rhs) == (0.0, 0.0)

    skewed = DiscreteMeasure(PNormSpace(1, 2.0), [[0.0], [10.0]], [0.99, 0.01])
    r = scalar_chebyshev(skewed, 9.0)
    assert r.lhs == pytest.approx(0.01, abs=1e-15)
    assert r.rhs == pytest.approx(0.99 / 81.0, rel=1e-12)


def test_scalar_rejects_higher_dim():
    with pytest.raises(ShapeError):
        scalar_chebyshev(signs_measure(2), 1.0)


def test_euclidean_examples():
    r = euclidean_chebyshev(signs_measure(2), 1.0)
    assert (r.lhs, r.rhs) == (1.0, 1.0)

    p = euclidean_chebyshev(point_mass(3, 2.0), 0.5)
    assert (p.lhs, p.rhs) == (0.0, 0.0)

    with pytest.raises(ApplicabilityError):
        euclidean_chebyshev(signs_measure(2, p=1.0), 1.0)


def test_grenander_examples():
    # quarter weights are exactly representable, so equality is exact
    tight = grenander(signs_measure(2), 1.0)
    assert (tight.lhs, tight.rhs) == (1.0, 1.0)

    loose = grenander(signs_measure(2), 2.0)
    assert loose.lhs == 0.0
    assert loose.rhs == pytest.approx(0.25, rel=1e-15)

    zero = grenander(point_mass(2, 0.0), 1.0)
    assert (zero.lhs, zero.rhs) == (0.0, 0.0)

    with pytest.raises(ApplicabilityError):
        grenander(signs_measure(2, p=3.0), 1.0)


def test_chen_examples():
    tight = chen(signs_measure(2), 2.0)
    assert (tight.lhs, tight.rhs) == (1.0, 1.0)
    assert tight.slack == 0.0

    loose = chen(signs_measure(2), 4.0)
    assert loose.lhs == 0.0
    assert loose.rhs == pytest.approx(0.5, rel=1e-15)

    fair = DiscreteMeasure(PNormSpace(1, 2.0), [[-1.0], [1.0]], [0.5, 0.5])
    reduced = chen(fair, 1.0)
    assert (reduced.lhs, reduced.rhs) == (1.0, 1.0)


def test_chen_preconditions():
    shifted = DiscreteMeasure(PNormSpace(1, 2.0), [[0.0], [1.0]], [0.5, 0.5])
    with pytest.raises(CenteringError):
        chen(shifted, 1.0)
    with pytest.raises(NotPositiveDefiniteError):
        chen(point_mass(2, 0.0), 1.0)


def test_rao_examples():
    forward, inverse = rao(signs_measure(2), 0.4)
    assert forward.inequality == "rao_forward"
    assert (forward.lhs, forward.rhs) == (1.0, 2.5)
    assert inverse.inequality == "rao_inverse"
    assert inverse.lhs == 1.0
    assert inverse.rhs == pytest.approx(10.0, rel=1e-15)

    _, inv1 = rao(signs_measure(2), 1.0)
    assert inv1.rhs == pytest.approx(4.0, rel=1e-15)

    with pytest.raises(NotPositiveDefiniteError):
        rao(point_mass(2, 0.0), 1.0)


def test_rao_strict_vs_banach_nonstrict_at_boundary():
    # every atom sits exactly at Mahalanobis value 2: the strict event is
    # empty while the non-strict one has full mass
    m = signs_measure(2)
    _, inverse = rao(m, 2.0)
    assert inverse.lhs == 0.0
    banach = banach_mahalanobis_bound(m, 2.0)
    assert banach.lhs == 1.0
    assert inverse.holds and banach.holds


def test_rao_forward_strict_at_boundary():
    forward, _ = rao(signs_measure(2), 0.5)
    assert forward.lhs == 0.0  # quad values sit exactly at 0.5


def test_banach_dual_examples():
    m = signs_measure(2)
    op = build(m)
    pstar = signs_measure(2, role="dual")
    r = banach_dual_bound(op, pstar, 0.5)
    assert (r.lhs, r.rhs) == (1.0, 2.0)

    origin = DiscreteMeasure(PNormSpace(2, 2.0), [[0.0, 0.0]], [1.0], role="dual")
    z = banach_dual_bound(op, origin, 0.25)
    assert (z.lhs, z.rhs) == (0.0, 0.0)

    huge = banach_dual_bound(op, pstar, 1e6)
    assert huge.lhs == 0.0
    assert huge.rhs == pytest.approx(1e-6, rel=1e-12)

    with pytest.raises(RoleError):
        banach_dual_bound(op, signs_measure(2), 0.5)
    with pytest.raises(ShapeError):
        banach_dual_bound(op, signs_measure(3, role="dual"), 0.5)


def test_banach_mahalanobis_examples():
    r = banach_mahalanobis_bound(signs_measure(2), 2.0)
    assert (r.lhs, r.rhs) == (1.0, 2.0)
    assert r.detail == {"norm_lower": 2.0, "norm_upper": 2.0, "norm_exact": True}

    far = banach_mahalanobis_bound(signs_measure(2), 8.0)
    assert far.lhs == 0.0
    assert far.rhs == pytest.approx(0.5, rel=1e-15)

    # p = 1 pair: S is the same matrix, the 1 -> inf inverse norm is exactly 2
    one = banach_mahalanobis_bound(signs_measure(2, p=1.0), 2.0)
    assert one.detail["norm_exact"]
    assert one.detail["norm_upper"] == 2.0
    assert one.rhs == pytest.approx(2.0, rel=1e-15)
    assert one.holds


def test_banach_mahalanobis_uses_upper_endpoint():
    rng = np.random.default_rng(109)
    for _ in range(10):
        m = random_measure(rng, dim=3, p=1.5, definite=True)
        r = banach_mahalanobis_bound(m, 1.0)
        d = r.detail
        assert d["norm_lower"] <= d["norm_upper"]
        expected = d["norm_upper"] ** 2 * second_moment(m) ** 2
        assert r.rhs == pytest.approx(expected, rel=1e-12)


def test_sweep_chen_grid():
    reports = sweep("chen", signs_measure(2), [1.0, 2.0, 4.0])
    assert [r.lhs for r in reports] == [1.0, 1.0, 0.0]
    assert [r.rhs for r in reports] == [2.0, 1.0, 0.5]
    assert all(r.holds for r in reports)


def test_sweep_single_point_and_errors():
    single = sweep("grenander", signs_measure(2), [0.5])
    assert len(single) == 1
    with pytest.raises(ValueError):
        sweep("grenander", signs_measure(2), [])
    with pytest.raises(ValueError):
        sweep("grenander", signs_measure(2), [2.0, 1.0])
    with pytest.raises(ValueError):
        sweep("grenander", signs_measure(2), [0.0, 1.0])
    with pytest.raises(ValueError):
        sweep("parseval", signs_measure(2), [1.0])
    with pytest.raises(ValueError):
        sweep("banach_dual", signs_measure(2), [1.0])


def test_sweep_monotonicity_and_no_violations():
    rng = np.random.default_rng(113)
    grid = np.geomspace(1e-2, 1e2, 20)
    for _ in range(10):
        m = random_measure(rng, dim=3, centered=True, definite=True)
        for inequality in ("grenander", "chen", "rao_forward", "rao_inverse",
                           "banach_mahalanobis"):
            reports = sweep(inequality, m, grid)
            lhs = [r.lhs for r in reports]
            rhs = [r.rhs for r in reports]
            assert all(r.holds for r in reports)
            assert all(a >= b for a, b in zip(lhs, lhs[1:]))
            assert all(a > b for a, b in zip(rhs, rhs[1:]))


def test_sweep_banach_dual_with_pstar():
    m = signs_measure(2)
    pstar = signs_measure(2, role="dual")
    reports = sweep("banach_dual", m, [0.5, 1.0, 2.0], pstar=pstar)
    assert [r.rhs for r in reports] == [2.0, 1.0, 0.5]
    assert all(r.holds for r in reports)


def test_epsilon_validation():
    m = signs_measure(2)
    for bad in (0.0, -1.0, math.nan, math.inf):
        with pytest.raises(ValueError):
            grenander(m, bad)


def test_mc_tail_degenerate_sampler():
    sampler = Sampler(
        space=PNormSpace(2, 2.0),
        family=GAUSSIAN,
        seed=0,
        mean=np.zeros(2),
        cov_factor=np.zeros((2, 2)),
    )
    r = mc_tail(sampler, "norm", None, 1.0, 500)
    assert r.lhs == 0.0
    assert r.ci_halfwidth == 0.0
    assert r.method == MONTE_CARLO
    assert r.holds


def test_mc_tail_determinism_and_seed_override():
    sampler = Sampler(
        space=PNormSpace(2, 2.0),
        family=GAUSSIAN,
        seed=5,
        mean=np.zeros(2),
        cov_factor=np.eye(2),
    )
    a = mc_tail(sampler, "norm", None, 1.0, 1000)
    b = mc_tail(sampler, "norm", None, 1.0, 1000)
    assert report_to_row(a) == report_to_row(b)
    c = mc_tail(sampler, "norm", None, 1.0, 1000, seed=6)
    assert c.lhs != a.lhs or c.ci_halfwidth != a.ci_halfwidth


def test_mc_tail_scalar_gaussian_tail():
    sampler = Sampler(
        space=PNormSpace(1, 2.0),
        family=GAUSSIAN,
        seed=0,
        mean=np.zeros(1),
        cov_factor=np.eye(1),
    )
    r = mc_tail(sampler, "norm", None, 1.0, 4000)
    two_sided = 2.0 * (1.0 - 0.8413447460685429)  # standard normal at 1
    assert abs(r.lhs - two_sided) <= r.ci_halfwidth
    assert r.ci_halfwidth == pytest.approx(
        3.0 * math.sqrt(r.lhs * (1.0 - r.lhs) / 4000.0), rel=1e-12
    )


def test_mc_tail_operator_statistics():
    m = signs_measure(2)
    op = build(m)
    inv = invert(op)
    sampler = Sampler(
        space=PNormSpace(2, 2.0),
        family=SYMMETRIC_ATOMS,
        seed=3,
        atoms=np.eye(2),
    )
    quad = mc_tail(sampler, "quad_S", op, 0.4, 500)
    assert quad.lhs == 1.0  # every draw has quad value exactly 0.5
    mahal = mc_tail(sampler, "mahalanobis_S", inv, 2.0, 500)
    assert mahal.lhs == 1.0  # boundary is included: the event is non-strict


def test_mc_tail_validation():
    sampler = Sampler(
        space=PNormSpace(2, 2.0),
        family=GAUSSIAN,
        seed=0,
        mean=np.zeros(2),
        cov_factor=np.eye(2),
    )
    op = build(signs_measure(2))
    with pytest.raises(ValueError):
        mc_tail(sampler, "norm", None, 1.0, 99)
    with pytest.raises(ValueError):
        mc_tail(sampler, "median", None, 1.0, 500)
    with pytest.raises(ValueError):
        mc_tail(sampler, "norm", op, 1.0, 500)
    with pytest.raises(ValueError):
        mc_tail(sampler, "quad_S", None, 1.0, 500)
    with pytest.raises(ValueError):
        mc_tail(sampler, "mahalanobis_S", op, 1.0, 500)


def test_report_validation():
    good = dict(
        inequality="grenander",
        epsilon=1.0,
        lhs=0.5,
        ci_halfwidth=0.0,
        rhs=1.0,
        holds=True,
        slack=0.5,
        method=EXACT_ENUMERATION,
    )
    BoundReport(**good)
    with pytest.raises(ValueError):
        BoundReport(**{**good, "lhs": 1.5})
    with pytest.raises(ValueError):
        BoundReport(**{**good, "holds": False})
    with pytest.raises(ValueError):
        BoundReport(**{**good, "slack": 0.25})
    with pytest.raises(ValueError):
        BoundReport(**{**good, "ci_halfwidth": 0.1})
    with pytest.raises(ValueError):
        BoundReport(**{**good, "inequality": "markov"})


def test_rows_sorted_and_round_trip():
    m = signs_measure(2)
    rows = []
    for inequality in ("grenander", "chen", "banach_mahalanobis"):
        for r in sweep(inequality, m, [0.4, 1.7, 3.0]):
            rows.append(report_to_row(r))
    # a third of a weight exercises the 17-digit formatting path
    thirds = DiscreteMeasure(
        PNormSpace(1, 2.0), [[-1.0], [0.5], [1.0]], [1.0 / 3.0] * 3
    )
    rows.append(report_to_row(scalar_chebyshev(thirds, 0.9)))

    ordered = sort_rows(rows)
    keys = [(row["inequality"], row["epsilon"]) for row in ordered]
    assert keys == sorted(keys)

    csv_text = rows_to_csv(ordered)
    assert rows_from_csv(csv_text) == ordered
    assert rows_to_csv(rows_from_csv(csv_text)) == csv_text

    json_text = rows_to_json(ordered)
    assert rows_from_json(json_text) == ordered


def test_inequality_enum_is_frozen():
    assert INEQUALITIES == (
        "scalar",
        "euclidean",
        "grenander",
        "chen",
        "rao_forward",
        "rao_inverse",
        "banach_dual",
        "banach_mahalanobis",
    )
