import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dendro.odometer import (
    Address,
    AddressError,
    EpsScrambledResult,
    FiberPoint,
    add,
    ell,
    embed_x,
    eps_scrambled_max,
    fiber_diam_traj,
    fiber_height,
    gehman_extend,
    in_cantor_restriction,
    in_cantor_set,
    pair_limsup_distance,
    rect_pattern,
    step,
    step_inverse,
)

F = Fraction

ONES = Address.ones()


# ---------------------------------------------------------------- addresses


def test_add_one_no_carry():
    assert add(ONES, 1).literal() == "21^inf"


def test_add_one_with_carry():
    assert add(Address.parse("21^inf"), 1).literal() == "021^inf"


def test_parse_format_roundtrip():
    for text in ("1^inf", "21^inf", "021^inf", "0211^inf", "2011^inf"):
        assert Address.parse(text).literal() == Address.parse(text).literal()
        back = Address.parse(Address.parse(text).literal())
        assert back == Address.parse(text)


@settings(max_examples=80, deadline=None)
@given(
    m=st.integers(min_value=-200, max_value=200),
    n=st.integers(min_value=-200, max_value=200),
    base=st.integers(min_value=0, max_value=60),
)
def test_group_action_law(m, n, base):
    alpha = add(ONES, base)
    assert add(add(alpha, m), n) == add(alpha, m + n)


def test_add_negative_inverts():
    rng = random.Random(0)
    for _ in range(50):
        n = rng.randint(-500, 500)
        assert add(add(ONES, n), -n) == ONES


def test_ell_examples():
    assert ell(ONES) == 0
    assert ell(add(ONES, 1)) == 1
    assert ell(add(add(ONES, 1), 1)) == 2  # 021^inf


# ---------------------------------------------------------------- embedding


def test_embed_ones():
    assert embed_x(ONES) == F(1, 2)


def test_embed_21():
    assert embed_x(Address.parse("21^inf")) == F(9, 10)


def test_embed_injective_on_random_addresses():
    rng = random.Random(3)
    seen = {}
    for _ in range(1000):
        digs = {i: rng.choice([0, 2]) for i in rng.sample(range(12), rng.randint(0, 4))}
        a = Address.from_digit_map(digs)
        x = embed_x(a)
        if x in seen:
            assert seen[x] == a
        seen[x] = a
    assert len(seen) >= 500


# ---------------------------------------------------------------- skew map


def test_step_examples():
    p = step(FiberPoint(ONES, F(1)))
    assert p.alpha.literal() == "21^inf" and p.y == F(1, 3)
    q = step(FiberPoint(Address.parse("21^inf"), F(1, 3)))
    assert q.alpha.literal() == "021^inf" and q.y == F(1, 9)


def test_step_bijection():
    rng = random.Random(5)
    for _ in range(1000):
        alpha = add(ONES, rng.randint(0, 3**6))
        y = fiber_height(alpha) * F(rng.randint(0, 64), 64)
        p = FiberPoint(alpha, y)
        assert step_inverse(step(p)) == p
        assert step(step_inverse(p)) == p


def test_step_stays_in_fiber():
    p = FiberPoint(ONES, F(1))
    for _ in range(200):
        p = step(p)
        assert 0 <= p.y <= fiber_height(p.alpha)


# ---------------------------------------------------------------- diameters


def test_fiber_diam_values_at_small_n():
    traj = fiber_diam_traj(ONES, 3)
    assert traj[0] == 1
    assert traj[1] == F(1, 3)  # 21^inf
    assert traj[3] == F(1, 3)  # 121^inf has a single non-1 digit
    assert traj == [F(1, 3 ** ell(add(ONES, n))) for n in range(4)]


def test_diam_never_full_after_start():
    # ell never returns to 0 along the forward orbit of the all-ones address
    traj = fiber_diam_traj(ONES, 729)
    assert all(v <= F(1, 3) for v in traj[1:])


def test_window_max_is_one_third():
    traj = fiber_diam_traj(ONES, 3**7)
    window = traj[1:]
    assert max(window) == F(1, 3)
    for j in range(7):
        assert traj[3**j] == F(1, 3)


def test_window_min_matches_digit_scan_oracle():
    # oracle: scan ell(1^inf + n) for 1 <= n <= 3^7 by direct digit arithmetic
    best = 0
    argbest = None
    for n in range(1, 3**7 + 1):
        e = ell(add(ONES, n))
        if e > best:
            best, argbest = e, n
    assert best == 8 and argbest == 1094
    traj = fiber_diam_traj(ONES, 3**7)
    assert min(traj[1:]) == F(1, 3**8)


# ---------------------------------------------------------------- scrambled sets


def test_eps_scrambled_values():
    assert eps_scrambled_max(ONES, F(1, 10)).size == 4
    assert eps_scrambled_max(ONES, F(1, 4)).size == 2
    assert eps_scrambled_max(ONES, F(1, 3)).size == 1
    assert eps_scrambled_max(ONES, F(1, 10)).analytic_bound == 4
    assert eps_scrambled_max(ONES, F(1, 4)).analytic_bound == 2


def test_eps_scrambled_greedy_matches_brute_force():
    # tiny grid: exhaustive subset check against the greedy sweep
    from itertools import combinations

    alpha = ONES
    eps = F(1, 5)
    res = eps_scrambled_max(alpha, eps, grid=12)
    pts = [F(i, 12) for i in range(13)]
    best = 1
    for k in range(2, 6):
        for combo in combinations(pts, k):
            if all(
                pair_limsup_distance(alpha, a, b) > eps
                for a, b in combinations(combo, 2)
            ):
                best = max(best, k)
    assert res.size == best


def test_pair_limsup_identity():
    # observed max over a long window approaches the exact limsup value
    y1, y2 = F(0), F(1)
    lim = pair_limsup_distance(ONES, y1, y2)
    assert lim == F(1, 3)
    p, q = FiberPoint(ONES, y1), FiberPoint(ONES, y2)
    seen = F(0)
    for _ in range(81):
        p, q = step(p), step(q)
        seen = max(seen, abs(p.y - q.y))
    assert seen == lim


def test_fiber_pair_scrambling_evidence():
    # one fiber pair: dips below 1/1000 and exceeds 1/4 within 3^7 steps
    p, q = FiberPoint(ONES, F(0)), FiberPoint(ONES, F(1))
    lo, hi = F(10), F(0)
    for _ in range(3**7):
        p, q = step(p), step(q)
        d = abs(p.y - q.y)
        lo, hi = min(lo, d), max(hi, d)
    assert lo <= F(1, 1000)
    assert hi > F(1, 4)


# ---------------------------------------------------------------- distality across fibers


def first_difference(a: Address, b: Address) -> int:
    top = 0
    for p, _ in a.digits + b.digits:
        top = max(top, p)
    for i in range(top + 2):
        if a.digit(i) != b.digit(i):
            return i
    raise AssertionError("addresses equal")


def test_cross_fiber_gap_identity():
    rng = random.Random(11)
    for _ in range(60):
        a = add(ONES, rng.randint(0, 3**5))
        b = add(ONES, rng.randint(0, 3**5))
        if a == b:
            continue
        v = first_difference(a, b)
        for n in (0, 1, 7, 50):
            an, bn = add(a, n), add(b, n)
            assert first_difference(an, bn) == v
            gap = abs(embed_x(an) - embed_x(bn))
            assert gap >= F(1, 5 ** (v + 1))


# ---------------------------------------------------------------- Cantor section


def test_in_cantor_examples():
    assert in_cantor_restriction(FiberPoint(ONES, F(2, 3)))
    p2 = step(FiberPoint(ONES, F(2, 3)))
    assert p2.y == F(2, 9)
    assert in_cantor_restriction(p2)
    assert not in_cantor_restriction(FiberPoint(ONES, F(1, 2)))
    assert in_cantor_restriction(FiberPoint(Address.parse("21^inf"), F(0)))


def test_cantor_membership_edge_cases():
    assert in_cantor_set(F(0)) and in_cantor_set(F(1))
    assert in_cantor_set(F(1, 3))  # 0.0222... twin expansion
    assert in_cantor_set(F(1, 4))  # 0.020202...
    assert not in_cantor_set(F(1, 2))
    assert not in_cantor_set(F(4, 9))  # 0.11


def test_cantor_invariance_under_step():
    rng = random.Random(7)
    count = 0
    for _ in range(1000):
        alpha = add(ONES, rng.randint(0, 3**5))
        # pick a ternary-rational inside the scaled Cantor set
        digs = [rng.choice([0, 2]) for _ in range(6)]
        y = sum(F(d, 3 ** (i + 1)) for i, d in enumerate(digs))
        p = FiberPoint(alpha, y * fiber_height(alpha))
        if not in_cantor_restriction(p):
            continue
        count += 1
        assert in_cantor_restriction(step(p))
        assert in_cantor_restriction(step_inverse(p))
    assert count > 900


# ---------------------------------------------------------------- rectangle pattern


def test_rect_pattern_depth0():
    (r,) = rect_pattern(0)
    assert (r.x0, r.x1, r.y0, r.y1) == (F(0), F(1), F(0), F(1))


def test_rect_pattern_depth1():
    rects = {r.word: r for r in rect_pattern(1)}
    assert len(rects) == 3
    k1 = rects["1"]
    assert (k1.x0, k1.x1, k1.y0, k1.y1) == (F(2, 5), F(3, 5), F(0), F(1))
    k0 = rects["0"]
    assert (k0.x0, k0.x1, k0.y0, k0.y1) == (F(0), F(1, 5), F(0), F(1, 3))


def test_rect_pattern_contains_fibers():
    # the horizontal embedding of an address prefix lands inside its rectangle
    rects = {r.word: r for r in rect_pattern(2)}
    for n in range(9):
        alpha = add(ONES, n)
        word = f"{alpha.digit(0)}{alpha.digit(1)}"
        r = rects[word]
        x = embed_x(alpha)
        assert r.x0 <= x <= r.x1


# ---------------------------------------------------------------- extension


def test_gehman_extend_depth2_shape():
    D, Fmap = gehman_extend(2)
    assert len(D.vertices) == 7
    leaves = [v for v in D.vertices if D.degree(v) == 1]
    assert len(leaves) == 4
    branch = [v for v in D.vertices if D.degree(v) == 3]
    assert all(D.degree(v) == 3 for v in branch)
    assert len(branch) == 2


def test_gehman_leaf_action_bijection():
    D, Fmap = gehman_extend(3)
    leaves = sorted(v for v in D.vertices if D.degree(v) == 1 and v != "g")
    images = {Fmap.vertex_images[v].vertex for v in leaves}
    assert images == set(leaves)


def test_gehman_interior_reaches_fixed_point():
    from dendro.metric_tree import PointRef
    from dendro.tree_map import iterate_apply

    D, Fmap = gehman_extend(2)
    root = PointRef(vertex="g")
    assert Fmap.apply(root) == root
    for v in D.vertices:
        if D.degree(v) == 1 and v != "g":
            continue
        assert iterate_apply(Fmap, PointRef(vertex=v), 2) == root
    # midpoints of every edge also land on the root within depth steps
    for e in range(len(D.edges)):
        mid = D.point(e, D.edge_length(e) / 2)
        assert iterate_apply(Fmap, mid, 2) == root


def test_gehman_leaf_labels_are_orbit_prefixes():
    D, _ = gehman_extend(2)
    labels = D.descriptor["leaf_cylinders"]
    assert len(set(labels.values())) == 4
    # successive +1 prefixes of the all-ones orbit
    assert set(labels.values()) == {"11", "21", "02", "12"}
