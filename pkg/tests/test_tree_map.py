import random
from fractions import Fraction

import pytest

from dendro.metric_tree import (
    Dendrite,
    GeometryError,
    PointRef,
    full_subtree,
    geodesic,
    h1_measure,
    make_subtree,
    subtree_diam,
    union_subtrees,
)
from dendro.tree_map import (
    ADMIRES,
    EVADES,
    FIXED,
    JUMPS_OVER,
    TreeMap,
    classify_relation,
    compose,
    identity_map,
    iterate_apply,
    m_min,
    orbit_decomposition,
    orbit_images,
)
from oracles import tent_iterate_interval

F = Fraction


def V(name):
    return PointRef(vertex=name)


def interval(D, lo, hi):
    return make_subtree(D, {0: (F(lo), F(hi))})


# ---------------------------------------------------------------- apply


def test_tent_peak(tent, unit_arc):
    assert tent.apply(unit_arc.point(0, F(1, 2))) == V("1")


def test_tent_fixed_endpoint(tent):
    assert tent.apply(V("0")) == V("0")


def test_tent_twice_by_composition(tent, unit_arc):
    tent2 = compose(tent, tent)
    x = unit_arc.point(0, F(3, 8))
    # hand oracle: T(3/8) = 3/4, T(3/4) = 1/2
    assert tent.apply(x) == unit_arc.point(0, F(3, 4))
    assert tent2.apply(x) == unit_arc.point(0, F(1, 2))
    assert tent2.apply(x) == tent.apply(tent.apply(x))


def test_apply_rejects_foreign_point(tent, star3):
    with pytest.raises(GeometryError):
        tent.apply(star3.point(2, F(1, 12)))


# ---------------------------------------------------------------- image


def test_tent_image_linear_piece(tent, unit_arc):
    S = interval(unit_arc, 0, F(1, 4))
    assert tent.image(S) == interval(unit_arc, 0, F(1, 2))


def test_tent_image_surjective(tent, unit_arc):
    assert tent.image(full_subtree(unit_arc)) == full_subtree(unit_arc)


def test_star_map_image_over_two_arms(star3):
    # send arm 1 across arms 2 and 3: e1 -> e2, c -> e3 say, with geodesic rule
    Fm = TreeMap(
        star3,
        star3,
        vertex_images={
            "c": V("e3"),
            "e1": V("e2"),
            "e2": V("e2"),
            "e3": V("e3"),
        },
    )
    arm1 = geodesic(star3, V("c"), V("e1"))
    img = Fm.image(arm1)
    # per-edge oracle: image is geodesic(e3, e2) = arms 2 and 3
    assert img == geodesic(star3, V("e3"), V("e2"))


def test_image_connectivity_asserted(tent, unit_arc):
    imgs = orbit_images(tent, interval(unit_arc, F(1, 8), F(1, 4)), 5)
    for s in imgs:
        assert len(union_subtrees(unit_arc, [s])) == 1


def test_semigroup_law_random_small_maps():
    rng = random.Random(5)
    for trial in range(12):
        D = _random_tree(rng, edges=rng.randint(2, 5))
        Fm = _random_map(rng, D)
        G2 = compose(Fm, Fm)
        S = _random_interval(rng, D)
        assert G2.image(S) == Fm.image(Fm.image(S)), f"trial {trial}"
        for _ in range(5):
            x = _random_point(rng, D)
            assert G2.apply(x) == Fm.apply(Fm.apply(x))


def _random_tree(rng, edges):
    vertices = ["v0"]
    eds = []
    for i in range(1, edges + 1):
        parent = rng.choice(vertices)
        name = f"v{i}"
        vertices.append(name)
        eds.append((parent, name, F(rng.randint(1, 6), rng.randint(1, 4))))
    return Dendrite(vertices, eds)


def _random_point(rng, D):
    e = rng.randrange(len(D.edges))
    den = rng.randint(1, 8)
    return D.point(e, D.edge_length(e) * F(rng.randint(0, den), den))


def _random_map(rng, D):
    vi = {v: _random_point(rng, D) for v in D.vertices}
    breaks = {}
    for e in range(len(D.edges)):
        if rng.random() < 0.5:
            t = D.edge_length(e) * F(rng.randint(1, 3), 4)
            breaks[e] = ((t, _random_point(rng, D)),)
    return TreeMap(D, D, vi, breaks)


def _random_interval(rng, D):
    e = rng.randrange(len(D.edges))
    L = D.edge_length(e)
    a = L * F(rng.randint(0, 3), 8)
    b = a + (L - a) * F(rng.randint(1, 4), 4)
    return make_subtree(D, {e: (a, b)})


# ---------------------------------------------------------------- trichotomy


def test_classify_tent_relations(tent, unit_arc):
    a = V("0")
    assert classify_relation(tent, a, unit_arc.point(0, F(1, 2))) == EVADES
    assert classify_relation(tent, a, unit_arc.point(0, F(3, 4))) == ADMIRES
    assert classify_relation(tent, a, unit_arc.point(0, F(2, 3))) == FIXED


def test_classify_jumps_over(flip, sym_arc):
    # x = 1/2 maps to -1/2; the origin separates them
    a = sym_arc.marked["origin"]
    x = sym_arc.point(1, F(1, 2))
    assert classify_relation(flip, a, x) == JUMPS_OVER


def test_classify_requires_distinct_points(tent):
    with pytest.raises(GeometryError):
        classify_relation(tent, V("0"), V("0"))


def test_trichotomy_totality_endpoint_base(tent, unit_arc):
    # endpoint base: jumps_over never occurs
    for num in range(1, 16):
        x = unit_arc.point(0, F(num, 16))
        label = classify_relation(tent, V("0"), x)
        assert label in (FIXED, EVADES, ADMIRES)


def test_trichotomy_totality_random(flip, sym_arc):
    rng = random.Random(2)
    a = sym_arc.point(1, F(1, 4))
    for _ in range(30):
        e = rng.randrange(2)
        x = sym_arc.point(e, F(rng.randint(1, 7), 8))
        if x == a:
            continue
        label = classify_relation(flip, a, x)
        assert label in (FIXED, EVADES, ADMIRES, JUMPS_OVER)


# ---------------------------------------------------------------- orbit decomposition


def test_orbit_decomposition_tent(tent, unit_arc):
    E = interval(unit_arc, 0, F(1, 4))
    dec = orbit_decomposition(tent, E, horizon=10)
    assert dec.conclusive
    assert dec.n0 == 0 and dec.k == 1 and dec.r == 1
    assert dec.L_sets[0] == full_subtree(unit_arc)
    # iteration oracle: [0,1/4] -> [0,1/2] -> [0,1]
    assert tent_iterate_interval(F(0), F(1, 4), 2) == (F(0), F(1))


def test_orbit_decomposition_flip(flip, sym_arc):
    E = make_subtree(sym_arc, {1: (F(1, 2), F(1))})
    dec = orbit_decomposition(flip, E, horizon=10)
    assert dec.conclusive
    assert (dec.n0, dec.k, dec.r) == (0, 2, 2)
    assert dec.L_sets[0] == E
    assert dec.L_sets[1] == make_subtree(sym_arc, {0: (F(0), F(1, 2))})


def test_orbit_decomposition_invariant_set(tent, unit_arc):
    E = full_subtree(unit_arc)
    dec = orbit_decomposition(tent, E, horizon=5)
    assert (dec.n0, dec.k, dec.r) == (0, 1, 1)


def test_orbit_decomposition_inconclusive(sym_arc):
    # translation-like map with no return within horizon: x -> x/2 toward -1
    Fm = TreeMap(
        sym_arc,
        sym_arc,
        vertex_images={"-1": V("-1"), "0": sym_arc.point(0, F(1, 2)), "1": V("0")},
    )
    E = make_subtree(sym_arc, {1: (F(3, 4), F(7, 8))})
    dec = orbit_decomposition(Fm, E, horizon=3)
    assert not dec.conclusive


def test_m_min(tent, flip, unit_arc, sym_arc):
    assert m_min(tent, interval(unit_arc, 0, F(1, 4)), 10) == 1
    assert m_min(flip, make_subtree(sym_arc, {1: (F(1, 2), F(1))}), 10) == 2
    assert m_min(identity_map(unit_arc), interval(unit_arc, 0, F(1, 2)), 4) == 1


def test_decomposition_laws_random():
    rng = random.Random(9)
    checked = 0
    while checked < 8:
        D = _random_tree(rng, edges=rng.randint(2, 4))
        Fm = _random_map(rng, D)
        E = _random_interval(rng, D)
        dec = orbit_decomposition(Fm, E, horizon=9)
        if not dec.conclusive or not all(dec.K_stabilized):
            continue
        assert dec.k % dec.r == 0
        assert dec.cyclic_ok is True
        # each component is the union of its residue-class K sets
        for j in range(dec.r):
            expected = union_subtrees(
                D, [dec.K_sets[j + l * dec.r] for l in range(dec.k // dec.r)]
            )
            assert len(expected) == 1 and expected[0] == dec.L_sets[j]
        checked += 1


# ---------------------------------------------------------------- serialization


def test_treemap_roundtrip(tent):
    d = tent.to_dict()
    back = TreeMap.from_dict(d)
    assert back.to_dict() == d
    assert back.apply(back.domain.point(0, F(1, 3))) == tent.apply(
        tent.domain.point(0, F(1, 3))
    )


def test_m_min_inconclusive(sym_arc):
    # drifting map: images never meet within the horizon
    Fm = TreeMap(
        sym_arc,
        sym_arc,
        vertex_images={
            "-1": V("-1"),
            "0": sym_arc.point(0, F(1, 2)),
            "1": V("0"),
        },
    )
    E = make_subtree(sym_arc, {1: (F(3, 4), F(7, 8))})
    assert m_min(Fm, E, 2) is None
