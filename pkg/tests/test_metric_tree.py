import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dendro.metric_tree import (
    GeometryError,
    PointRef,
    ball,
    components_minus,
    contains_point,
    dist,
    enclosed,
    full_subtree,
    geodesic,
    h1_measure,
    ideal_point_order,
    intersect_subtrees,
    is_full,
    make_subtree,
    point_order,
    point_subtree,
    project,
    refine_at,
    span_subtree,
    subtree_boundary_contains,
    subtree_components,
    subtree_diam,
    subtree_dist,
    subtree_points,
    subtrees_intersect,
    union_connected,
    union_subtrees,
    upper_set,
)
from oracles import brute_nearest, dijkstra_dist, grid_points

F = Fraction


def V(name):
    return PointRef(vertex=name)


# ---------------------------------------------------------------- distances


def test_star3_dist_between_tips(star3):
    assert dist(star3, V("e1"), V("e2")) == F(5, 6)


def test_dist_identity(star3):
    assert dist(star3, V("c"), V("c")) == 0


def test_comb_dist_matches_path_sum_oracle(comb3):
    # tip of the tooth at x=1 to the left end of the base
    expected = dijkstra_dist(comb3.to_dict(), "t@1", "b@-1")
    assert expected == F(3)  # tooth height 1 plus base length 2
    assert dist(comb3, V("t@1"), V("b@-1")) == expected


def test_dist_interior_points(star3):
    x = star3.point(0, F(1, 4))  # on arm 1
    y = star3.point(1, F(1, 6))  # on arm 2
    assert dist(star3, x, y) == F(1, 4) + F(1, 6)


def test_invalid_point_rejected(star3):
    with pytest.raises(GeometryError):
        dist(star3, PointRef(edge=0, offset=F(2)), V("c"))
    with pytest.raises(GeometryError):
        star3.check_point(V("nope"))


# ---------------------------------------------------------------- geodesics


def test_geodesic_tip_to_tip_passes_center(star3):
    arc = geodesic(star3, V("e1"), V("e2"))
    assert "c" in arc.vertices
    assert h1_measure(arc) == F(5, 6)


def test_geodesic_degenerate(star3):
    g = geodesic(star3, V("c"), V("c"))
    assert g.is_degenerate()
    assert contains_point(star3, g, V("c"))


def test_comb_geodesic_matches_oracle(comb3):
    x, y = V("t@1/2"), V("b@1")
    arc = geodesic(comb3, x, y)
    assert h1_measure(arc) == dijkstra_dist(comb3.to_dict(), "t@1/2", "b@1")
    assert contains_point(comb3, arc, V("b@1/2"))


def test_geodesic_length_equals_dist(star3, comb3):
    rng = random.Random(7)
    for D in (star3, comb3):
        for _ in range(40):
            e1, e2 = rng.randrange(len(D.edges)), rng.randrange(len(D.edges))
            x = D.point(e1, D.edge_length(e1) * F(rng.randint(0, 8), 8))
            y = D.point(e2, D.edge_length(e2) * F(rng.randint(0, 8), 8))
            assert h1_measure(geodesic(D, x, y)) == dist(D, x, y)


@settings(max_examples=60, deadline=None)
@given(
    a=st.fractions(min_value=0, max_value=1, max_denominator=24),
    b=st.fractions(min_value=0, max_value=1, max_denominator=24),
    t=st.fractions(min_value=0, max_value=1, max_denominator=24),
    e1=st.integers(min_value=0, max_value=3),
    e2=st.integers(min_value=0, max_value=3),
)
def test_convexity_identity_on_comb(comb3, a, b, t, e1, e2):
    # z on [x,y] splits the distance exactly
    x = comb3.point(e1, comb3.edge_length(e1) * a)
    y = comb3.point(e2, comb3.edge_length(e2) * b)
    d = dist(comb3, x, y)
    z = _point_on_arc(comb3, x, y, t)
    assert dist(comb3, x, z) + dist(comb3, z, y) == d


def _point_on_arc(D, x, y, frac):
    from dendro.metric_tree import point_along

    return point_along(D, x, y, dist(D, x, y) * frac)


# ---------------------------------------------------------------- projection


def test_project_tip_onto_other_arm(star3):
    E = geodesic(star3, V("c"), V("e2"))
    p = project(star3, E, V("e1"))
    assert p == V("c")
    q, qd = brute_nearest(star3, E, V("e1"))
    assert q == V("c") and qd == dist(star3, V("e1"), p)


def test_project_inside_is_identity(star3):
    E = geodesic(star3, V("c"), V("e2"))
    x = star3.point(1, F(1, 5))
    assert project(star3, E, x) == x


def test_project_between_arms(star3):
    E = geodesic(star3, V("e2"), V("e3"))
    assert project(star3, E, V("e1")) == V("c")


def test_projection_is_unique_minimizer(comb3):
    rng = random.Random(3)
    for _ in range(20):
        e = rng.randrange(len(comb3.edges))
        x = comb3.point(e, comb3.edge_length(e) * F(rng.randint(0, 6), 6))
        E = geodesic(comb3, V("b@-1"), V("t@1/3"))
        p = project(comb3, E, x)
        dp = dist(comb3, x, p)
        for q in grid_points(comb3, E, steps=6):
            dq = dist(comb3, x, q)
            assert dq >= dp
            if dq == dp:
                assert q == p


def test_project_first_point_property(comb3):
    # project(x, E) lies on [x, e] for every e in E
    E = geodesic(comb3, V("b@0"), V("b@1"))
    x = V("t@1/2")
    p = project(comb3, E, x)
    for e in grid_points(comb3, E, steps=5):
        arc = geodesic(comb3, x, e)
        assert contains_point(comb3, arc, p)


# ---------------------------------------------------------------- upper_set / enclosed


def _membership_upper(D, a, x, y):
    # y in D^a(x) iff x lies on [a, y]
    return dist(D, a, y) == dist(D, a, x) + dist(D, x, y)


def test_upper_set_star3(star3):
    S = upper_set(star3, V("e1"), V("c"))
    # {c} plus arms 2 and 3
    assert contains_point(star3, S, V("e2"))
    assert contains_point(star3, S, V("e3"))
    assert contains_point(star3, S, V("c"))
    assert not contains_point(star3, S, star3.point(0, F(1, 4)))
    for y in grid_points(star3, full_subtree(star3), steps=6):
        assert contains_point(star3, S, y) == _membership_upper(
            star3, V("e1"), V("c"), y
        )


def test_upper_set_a_equals_x(star3):
    assert is_full(star3, upper_set(star3, V("c"), V("c")))


def test_upper_set_endpoint(star3):
    S = upper_set(star3, V("c"), V("e1"))
    assert S == point_subtree(star3, V("e1"))


def test_enclosed_examples(star3):
    assert enclosed(star3, V("c"), V("e1")) == geodesic(star3, V("c"), V("e1"))
    assert is_full(star3, enclosed(star3, V("e1"), V("e2")))
    assert enclosed(star3, V("c"), V("c")) == point_subtree(star3, V("c"))


def test_upper_enclosed_partition(comb3):
    a, b = V("b@-1"), V("t@1/2")
    Sa = upper_set(comb3, b, a)
    Sb = upper_set(comb3, a, b)
    mid = enclosed(comb3, a, b)
    for y in grid_points(comb3, full_subtree(comb3), steps=5):
        count = (
            contains_point(comb3, Sa, y)
            + contains_point(comb3, Sb, y)
            + contains_point(comb3, mid, y)
        )
        if y in (a, b):
            assert count == 2
        else:
            assert count == 1


# ---------------------------------------------------------------- complements


def test_components_minus_center(star3):
    dec = components_minus(star3, point_subtree(star3, V("c")))
    assert len(dec.components) == 3
    assert all(b == V("c") for b in dec.boundary_points)


def test_components_minus_base_arc(comb3):
    base = geodesic(comb3, V("b@-1"), V("b@1"))
    dec = components_minus(comb3, base)
    # teeth at 1, 1/2, 1/3 and the segment at 0
    assert len(dec.components) == 4
    names = {b.vertex for b in dec.boundary_points}
    assert names == {"b@1", "b@1/2", "b@1/3", "b@0"}
    for comp, b in zip(dec.components, dec.boundary_points):
        assert subtree_boundary_contains(comb3, base, b)
        assert contains_point(comb3, comp, b)


def test_components_minus_arm(star3):
    arm1 = geodesic(star3, V("c"), V("e1"))
    dec = components_minus(star3, arm1)
    assert len(dec.components) == 2
    assert {b.vertex for b in dec.boundary_points} == {"c"}
    grouped = dec.grouped(star3)
    assert len(grouped) == 1  # both arms attach at c


def test_components_minus_whole(star3):
    dec = components_minus(star3, full_subtree(star3))
    assert dec.is_whole and dec.components == ()


def test_components_minus_flood_fill_oracle(comb3):
    base = geodesic(comb3, V("b@-1"), V("b@1"))
    dec = components_minus(comb3, base)
    # each component is one tooth: its measure equals the tooth height
    heights = sorted(h1_measure(c) for c in dec.components)
    assert heights == sorted([F(1), F(1), F(1, 2), F(1, 3)])


# ---------------------------------------------------------------- orders, measure


def test_point_order(star3, comb3):
    assert point_order(star3, V("c")) == 3
    assert point_order(star3, V("e1")) == 1
    assert point_order(comb3, V("b@1/2")) == 3
    assert point_order(comb3, comb3.point(0, comb3.edge_length(0) / 2)) == 2


def test_ideal_point_order_omega_star():
    import math

    from dendro.gallery import FamilyDescriptor, generate

    D = generate(FamilyDescriptor("omega_star", {"arms": 4, "q": F(1, 2)}))
    assert ideal_point_order(D, D.marked["center"]) == math.inf
    assert point_order(D, D.marked["center"]) == 4


def test_h1_measure(star3):
    assert h1_measure(full_subtree(star3)) == 1
    assert h1_measure(point_subtree(star3, V("c"))) == 0
    half_arm = make_subtree(star3, {0: (F(0), F(1, 4))})
    assert h1_measure(half_arm) == F(1, 4)


# ---------------------------------------------------------------- subtree algebra


def test_span_and_union(star3):
    S = span_subtree(star3, [V("e1"), V("e2"), V("e3")])
    assert is_full(star3, S)
    parts = [geodesic(star3, V("c"), V("e1")), geodesic(star3, V("c"), V("e2"))]
    u = union_connected(star3, parts)
    assert h1_measure(u) == F(5, 6)


def test_union_disconnected_components(star3):
    a = make_subtree(star3, {0: (F(1, 4), F(1, 2))})
    b = make_subtree(star3, {1: (F(1, 6), F(1, 3))})
    comps = union_subtrees(star3, [a, b])
    assert len(comps) == 2


def test_intersection_of_arms(star3):
    a1 = geodesic(star3, V("c"), V("e1"))
    a2 = geodesic(star3, V("c"), V("e2"))
    cap = intersect_subtrees(star3, a1, a2)
    assert cap == point_subtree(star3, V("c"))


def test_helly_property(comb3):
    rng = random.Random(11)
    pts = grid_points(comb3, full_subtree(comb3), steps=4)
    done = 0
    while done < 40:
        picks = [rng.sample(range(len(pts)), 2) for _ in range(3)]
        subs = [span_subtree(comb3, [pts[i], pts[j]]) for i, j in picks]
        if all(
            subtrees_intersect(subs[i], subs[j])
            for i in range(3)
            for j in range(i + 1, 3)
        ):
            total = intersect_subtrees(
                comb3, intersect_subtrees(comb3, subs[0], subs[1]), subs[2]
            )
            assert not total.is_empty()
            done += 1


def test_subtree_dist_and_diam(star3):
    s1 = make_subtree(star3, {0: (F(1, 4), F(1, 2))})  # outer half of arm 1
    s2 = make_subtree(star3, {1: (F(1, 6), F(1, 3))})  # outer half of arm 2
    assert subtree_dist(star3, s1, s2) == F(1, 4) + F(1, 6)
    assert subtree_dist(star3, s1, s1) == 0
    assert subtree_diam(star3, full_subtree(star3)) == F(5, 6)
    assert subtree_diam(star3, s1) == F(1, 4)


# ---------------------------------------------------------------- balls


def test_ball_is_exact_distance_sublevel(star3):
    B = ball(star3, V("c"), F(1, 4))
    for p in grid_points(star3, full_subtree(star3), steps=8):
        assert contains_point(star3, B, p) == (dist(star3, V("c"), p) <= F(1, 4))


def test_ball_around_edge_point(comb3):
    x = comb3.point(0, comb3.edge_length(0) / 2)
    B = ball(comb3, x, F(1, 8))
    for p in grid_points(comb3, full_subtree(comb3), steps=8):
        assert contains_point(comb3, B, p) == (dist(comb3, x, p) <= F(1, 8))


def test_ball_radius_covers_everything(star3):
    assert is_full(star3, ball(star3, V("c"), F(2)))


# ---------------------------------------------------------------- refinement, io


def test_refine_at_preserves_geometry(star3):
    x = star3.point(0, F(1, 4))
    D2, mp = refine_at(star3, [x])
    assert len(D2.edges) == len(star3.edges) + 1
    assert D2.total_length() == star3.total_length()
    assert mp(x).is_vertex


def test_dendrite_roundtrip(comb3):
    from dendro.metric_tree import Dendrite

    d = comb3.to_dict()
    back = Dendrite.from_dict(d)
    assert back == comb3
    assert back.to_dict() == d


def test_subtree_components(star3):
    S = make_subtree(star3, {0: (F(1, 4), F(1, 2))})
    T = make_subtree(star3, {1: (F(1, 6), F(1, 3))})
    parts = union_subtrees(star3, [S, T])
    whole = subtree_components(
        star3,
        make_subtree(
            star3,
            {0: (F(1, 4), F(1, 2)), 1: (F(1, 6), F(1, 3))},
        ),
    )
    assert len(whole) == 2
    assert sorted(h1_measure(c) for c in whole) == sorted(
        h1_measure(c) for c in parts
    )


def test_upper_set_interior_point(star3):
    x = star3.point(0, F(1, 4))  # middle of arm 1
    S = upper_set(star3, V("c"), x)
    # the far side: outer half of arm 1 including the tip
    assert contains_point(star3, S, V("e1"))
    assert contains_point(star3, S, x)
    assert not contains_point(star3, S, V("c"))
    assert h1_measure(S) == F(1, 4)
    for y in grid_points(star3, full_subtree(star3), steps=8):
        assert contains_point(star3, S, y) == _membership_upper(star3, V("c"), x, y)


def test_enclosed_interior_endpoints(star3):
    a = star3.point(0, F(1, 8))
    b = star3.point(1, F(1, 6))
    reg = enclosed(star3, a, b)
    # the arc plus arm 3 hanging off the center
    assert contains_point(star3, reg, V("e3"))
    assert contains_point(star3, reg, V("c"))
    assert not contains_point(star3, reg, V("e1"))
    # arc [a,b] through c (1/8 + 1/6) plus the whole third arm (1/6)
    assert h1_measure(reg) == F(1, 8) + F(1, 6) + F(1, 6)
