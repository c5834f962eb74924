"""Length-expansion checking and desk-scale expanding surjection builders.

A map f between trees is rho-length-expanding for a family of test sets when
every member's image either covers the whole codomain or gains 1-dimensional
measure by a factor of at least rho.  The checker samples a family and
verifies the dichotomy; a returned witness re-verifies exactly, a pass is
sampling evidence only.

``build_pair`` produces, for a tree T of total measure 1 and a base point a,
a surjection phi: I -> T with phi(0) = phi(1) = a (a closed double-cover walk
of T composed with a constant-slope zigzag) and a surjection psi: T -> I with
psi(a) = 0 (a zigzag of the normalized distance to a).  Both are validated by
the checker; on failure the lap count doubles and the build retries.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from dendro.metric_tree import (
    Dendrite,
    GeometryError,
    PointRef,
    Subtree,
    dist,
    full_subtree,
    h1_measure,
    is_full,
    make_subtree,
)
from dendro.serialize import format_rat
from dendro.tree_map import TreeMap

F1 = Fraction(1)


class BuildError(RuntimeError):
    """Constructor gave up; carries the last checker witness."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


# ---------------------------------------------------------------------------
# dense families


@dataclass(frozen=True)
class DenseFamily:
    """Sampler for a dense family of nondegenerate test sets.

    kinds: ``all_closed_intervals`` on an arc domain (deterministic dyadic
    members first, then seeded random intervals), ``phi_images`` (images of
    the interval family under a fixed map), ``explicit``.
    """

    kind: str
    through: Optional[object] = None  # map for phi_images
    seed: int = 0
    members: tuple = ()

    def sample(self, D: Dendrite, count: int, seed: Optional[int] = None) -> list[Subtree]:
        seed = self.seed if seed is None else seed
        if self.kind == "explicit":
            return list(self.members)[:count]
        if self.kind == "all_closed_intervals":
            return _interval_family(D, count, seed)
        if self.kind == "phi_images":
            phi = self.through
            base = _interval_family(phi.domain, count, seed)
            out = []
            for J in base:
                C = phi.image(J)
                if not C.is_degenerate():
                    out.append(C)
            return out
        raise GeometryError(f"unknown dense family kind {self.kind!r}")


def _arc_edge(D: Dendrite) -> int:
    if len(D.edges) != 1:
        raise GeometryError("interval family needs a single-edge arc domain")
    return 0


def _interval_family(D: Dendrite, count: int, seed: int) -> list[Subtree]:
    e = _arc_edge(D)
    L = D.edge_length(e)
    fixed = [
        (Fraction(0), L),
        (Fraction(0), L / 2),
        (L / 2, L),
        (L / 4, 3 * L / 4),
        (Fraction(0), L / 4),
        (3 * L / 4, L),
        (L / 8, 3 * L / 8),
    ]
    out = [make_subtree(D, {e: iv}) for iv in fixed[:count]]
    rng = random.Random(seed)
    den = 256
    while len(out) < count:
        a = rng.randint(0, den - 1)
        b = rng.randint(a + 1, den)
        out.append(make_subtree(D, {e: (L * Fraction(a, den), L * Fraction(b, den))}))
    return out


# ---------------------------------------------------------------------------
# the checker


@dataclass(frozen=True)
class LEWitness:
    """A true violation of the expansion dichotomy."""

    set_: Subtree
    measure: Fraction
    image_measure: Fraction
    rho: Fraction

    def to_dict(self):
        return {
            "set": self.set_.to_dict(),
            "measure": format_rat(self.measure),
            "image_measure": format_rat(self.image_measure),
            "rho": format_rat(self.rho),
        }


def reverify(F, w: LEWitness) -> bool:
    """Recompute a witness from scratch; True iff it still violates."""
    img = F.image(w.set_)
    return (not is_full(F.codomain, img)) and h1_measure(img) < w.rho * h1_measure(
        w.set_
    )


def check_length_expanding(F, family: DenseFamily, rho, samples: int, seed: int = 0):
    """None on pass; the first LEWitness otherwise.

    A witness is sound (it re-verifies exactly); a pass is evidence over the
    sampled members only.
    """
    rho = Fraction(rho)
    if rho <= 1:
        raise GeometryError("rho must exceed 1")
    for C in family.sample(F.domain, samples, seed):
        if C.is_degenerate():
            continue
        img = F.image(C)
        if is_full(F.codomain, img):
            continue
        if h1_measure(img) < rho * h1_measure(C):
            return LEWitness(
                set_=C,
                measure=h1_measure(C),
                image_measure=h1_measure(img),
                rho=rho,
            )
    return None


# ---------------------------------------------------------------------------
# double-cover walk


def double_cover_walk(D: Dendrite, S: Subtree, root: str):
    """Closed depth-first walk from `root` covering each edge interval twice.

    Returns legs (cumulative_start, edge, t_from, t_to); total time is twice
    the measure of S.  S must consist of whole edges of D.
    """
    for e, (a, b) in S.intervals.items():
        if a != 0 or b != D.edge_length(e):
            raise GeometryError("walk needs a whole-edge subtree")
    adj: dict[str, list] = {v: [] for v in S.vertices}
    for e in sorted(S.intervals):
        ed = D.edges[e]
        adj[ed.u].append((e, ed.v))
        adj[ed.v].append((e, ed.u))
    legs = []
    clock = Fraction(0)

    def visit(v, blocked):
        nonlocal clock
        for e, w in adj[v]:
            if e == blocked:
                continue
            ed = D.edges[e]
            down = (Fraction(0), ed.length) if ed.u == v else (ed.length, Fraction(0))
            legs.append((clock, e, down[0], down[1]))
            clock += ed.length
            visit(w, e)
            legs.append((clock, e, down[1], down[0]))
            clock += ed.length

    if root not in adj:
        raise GeometryError("walk root must be a vertex of the subtree")
    visit(root, None)
    return legs


def walk_point(D: Dendrite, legs, s: Fraction) -> PointRef:
    """Point of the walk at time s (exact)."""
    for start, e, a, b in legs:
        leg_len = abs(b - a)
        if start <= s <= start + leg_len:
            t = a + (s - start) if b > a else a - (s - start)
            return D.point(e, t)
    raise GeometryError("walk time out of range")


# ---------------------------------------------------------------------------
# zigzags (triangle waves) with exact arithmetic


def sawtooth_positions(total: Fraction, slope_laps: int, start: Fraction):
    """Fold times and values of a triangle wave on [0,1] onto [0,total].

    The wave starts at `start`, rises first, travels slope_laps * total in
    unit time, and reflects at 0 and total.  Returns the list of
    (time, value) control points covering [0, 1].
    """
    speed = slope_laps * total
    pts = [(Fraction(0), start)]
    t = Fraction(0)
    pos = start
    direction = 1
    while t < 1:
        target = total if direction > 0 else Fraction(0)
        dt = (target - pos) / speed * direction
        if dt == 0:
            direction = -direction
            continue
        if t + dt >= 1:
            pos = pos + direction * speed * (1 - t)
            pts.append((F1, pos))
            break
        t += dt
        pos = target
        pts.append((t, pos))
        direction = -direction
    return pts


def _fold(u: Fraction, total: Fraction) -> Fraction:
    r = u % (2 * total)
    return r if r <= total else 2 * total - r


def sawtooth_value(total, laps: int, start, t) -> Fraction:
    """Triangle-wave value at parameter t in [0,1]; rises first from start."""
    total, start, t = Fraction(total), Fraction(start), Fraction(t)
    return _fold(start + laps * total * t, total)


def sawtooth_image(total, laps: int, start, a, b):
    """Exact (min, max) of the triangle wave over the parameters [a, b]."""
    import math

    total, start = Fraction(total), Fraction(start)
    a, b = Fraction(a), Fraction(b)
    if a > b:
        a, b = b, a
    u1 = start + laps * total * a
    u2 = start + laps * total * b
    lo = min(_fold(u1, total), _fold(u2, total))
    hi = max(_fold(u1, total), _fold(u2, total))
    # peaks at odd multiples of `total`, troughs at even multiples
    m_lo = math.ceil(u1 / total)
    m_hi = math.floor(u2 / total)
    if m_hi - m_lo >= 1:
        return Fraction(0), total
    for m in range(m_lo, m_hi + 1):
        if m % 2 == 0:
            lo = Fraction(0)
        else:
            hi = total
    return lo, hi


# ---------------------------------------------------------------------------
# pair construction


def initial_lap_count(rho) -> int:
    """Even zigzag stretch count: non-covering intervals expand >= rho."""
    rho = Fraction(rho)
    m = 2 * rho  # fold halves the stretch expansion; walk halves again
    laps = max(4, int(m) + (0 if m == int(m) else 1))
    return laps + (laps % 2)


@dataclass
class BuiltPair:
    phi: TreeMap
    psi: TreeMap
    space: Dendrite
    laps: int
    retries: int


def normalize_measure(T: Dendrite) -> Dendrite:
    """Rescale all edge lengths so the total measure is exactly 1."""
    total = T.total_length()
    if total == 1:
        return T
    scale = Fraction(1) / total
    return Dendrite(
        T.vertices,
        [(e.u, e.v, e.length * scale) for e in T.edges],
        marked=dict(T.marked),
        descriptor=T.descriptor,
    )


def build_phi(T: Dendrite, a: PointRef, laps: int) -> TreeMap:
    """Zigzag of the closed double-cover walk: I -> T, endpoints at a."""
    if not a.is_vertex:
        raise GeometryError("base point must be a vertex")
    return build_phi_on_subtree(T, full_subtree(T), a.vertex, laps)


def build_phi_on_subtree(T: Dendrite, S, root: str, laps: int) -> TreeMap:
    """Walk zigzag surjection I -> S for a whole-edge subtree S of T."""
    from dendro.metric_tree import h1_measure as _h1

    legs = double_cover_walk(T, S, root)
    total = 2 * _h1(S)
    unit = _unit_arc()
    controls = []
    # fold times of the zigzag I -> [0, total]
    zig = sawtooth_positions(total, laps, Fraction(0))
    for (t0, s0), (t1, s1) in zip(zig, zig[1:]):
        # within one monotone stretch, pull in the walk's leg boundaries
        lo, hi = (s0, s1) if s0 <= s1 else (s1, s0)
        cuts = [s0, s1]
        for start, _e, _a, _b in legs:
            if lo < start < hi:
                cuts.append(start)
        cuts = sorted(set(cuts), reverse=s0 > s1)
        for s in cuts:
            t = t0 + (t1 - t0) * (s - s0) / (s1 - s0)
            controls.append((t, walk_point(T, legs, s)))
    controls.sort(key=lambda tp: tp[0])
    vertex_images = {"0": controls[0][1], "1": controls[-1][1]}
    breaks = []
    seen = set()
    for t, p in controls:
        if 0 < t < 1 and t not in seen:
            seen.add(t)
            breaks.append((t, p))
    return TreeMap(unit, T, vertex_images, {0: tuple(breaks)})


def build_psi(T: Dendrite, a: PointRef, laps: int) -> TreeMap:
    """Zigzag of the normalized distance to a: T -> I, psi(a) = 0."""
    if not a.is_vertex:
        raise GeometryError("base point must be a vertex")
    radius = max(dist(T, a, PointRef(vertex=v)) for v in T.vertices)
    if radius == 0:
        raise GeometryError("degenerate tree")
    unit = _unit_arc()
    zig = sawtooth_positions(F1, laps, Fraction(0))

    def z_value(x: Fraction) -> Fraction:
        for (t0, s0), (t1, s1) in zip(zig, zig[1:]):
            if t0 <= x <= t1:
                return s0 + (s1 - s0) * (x - t0) / (t1 - t0)
        raise GeometryError("zigzag evaluation out of range")

    fold_times = sorted({t for t, _ in zig if 0 < t < 1})
    vertex_images = {}
    for v in T.vertices:
        n = dist(T, a, PointRef(vertex=v)) / radius
        vertex_images[v] = unit.point(0, z_value(n))
    edge_breaks = {}
    for e, ed in enumerate(T.edges):
        nu = dist(T, a, PointRef(vertex=ed.u)) / radius
        nv = dist(T, a, PointRef(vertex=ed.v)) / radius
        if nu == nv:
            raise GeometryError("edge with constant distance to base")
        brs = []
        for ft in fold_times:
            if min(nu, nv) < ft < max(nu, nv):
                t = (ft - nu) / (nv - nu) * ed.length
                brs.append((t, unit.point(0, z_value(ft))))
        if brs:
            edge_breaks[e] = tuple(sorted(brs, key=lambda tp: tp[0]))
    return TreeMap(T, unit, vertex_images, edge_breaks)


def _unit_arc() -> Dendrite:
    return Dendrite(["0", "1"], [("0", "1", F1)])


def build_pair(
    T: Dendrite,
    a: PointRef,
    rho,
    samples: int = 200,
    seed: int = 0,
    max_retries: int = 3,
    initial_laps: Optional[int] = None,
) -> BuiltPair:
    """Expanding surjections (phi: I -> T, psi: T -> I) validated at rho.

    T is rescaled to total measure 1 if needed (the returned ``space`` is the
    rescaled copy the maps live on).  The zigzag lap count doubles on each
    validation failure; exhausting the retry bound raises BuildError with the
    last witness.
    """
    rho = Fraction(rho)
    space = normalize_measure(T)
    if not a.is_vertex:
        raise GeometryError("base point must be a vertex")
    space.check_point(a)
    laps = initial_laps if initial_laps is not None else initial_lap_count(rho)
    last_witness = None
    for attempt in range(max_retries + 1):
        phi = build_phi(space, a, laps)
        psi = build_psi(space, a, laps)
        w = check_length_expanding(
            phi, DenseFamily("all_closed_intervals", seed=seed), rho, samples, seed
        )
        if w is None:
            w = check_length_expanding(
                psi, DenseFamily("phi_images", through=phi, seed=seed), rho,
                samples, seed,
            )
        if w is None:
            if phi.image(full_subtree(phi.domain)) != full_subtree(space):
                raise BuildError("phi is not surjective")
            return BuiltPair(phi=phi, psi=psi, space=space, laps=laps,
                             retries=attempt)
        last_witness = w
        laps *= 2
    raise BuildError(
        f"no expanding pair within {max_retries} retries", witness=last_witness
    )
