"""Piecewise-geodesic selfmaps of finite metric trees.

A :class:`TreeMap` is given by images of the domain vertices plus optional
interior breakpoints per edge; between consecutive control points the map
traverses the geodesic joining their images at constant speed.  This class
of maps is closed under composition with exact rational data, so point
images, set images and iterates are all computed exactly.

Maps may have distinct domain and codomain; iteration requires a selfmap.
Anything with ``domain``/``codomain``/``apply``/``image`` quacks like a map
here (the glued constructions elsewhere rely on that).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Optional

from dendro.metric_tree import (
    Dendrite,
    GeometryError,
    PointRef,
    Subtree,
    contains_point,
    dist,
    enclosed,
    geodesic,
    geodesic_walk,
    point_along,
    point_subtree,
    subtrees_intersect,
    union_connected,
    union_subtrees,
)
from dendro.serialize import format_rat, parse_rat


class TreeMap:
    """Constant-speed-onto-geodesic map determined by its control points."""

    kind = "piecewise"

    def __init__(self, domain: Dendrite, codomain: Dendrite, vertex_images,
                 edge_breaks=None):
        self.domain = domain
        self.codomain = codomain
        self.vertex_images: dict[str, PointRef] = dict(vertex_images)
        self.edge_breaks: dict[int, tuple] = {
            int(e): tuple((Fraction(t), p) for t, p in brs)
            for e, brs in (edge_breaks or {}).items()
            if brs
        }
        self._controls_cache: dict[int, tuple] = {}
        self._validate()

    def _validate(self):
        for v in self.domain.vertices:
            if v not in self.vertex_images:
                raise GeometryError(f"no image for vertex {v!r}")
            self.codomain.check_point(self.vertex_images[v])
        for e, brs in self.edge_breaks.items():
            L = self.domain.edge_length(e)
            last = Fraction(0)
            for t, p in brs:
                if not (0 < t < L):
                    raise GeometryError(f"breakpoint {t} outside edge {e}")
                if t <= last and last != 0:
                    raise GeometryError(f"breakpoints on edge {e} not increasing")
                last = t
                self.codomain.check_point(p)

    # -- control polyline per edge

    def controls(self, e: int):
        cached = self._controls_cache.get(e)
        if cached is None:
            ed = self.domain.edges[e]
            cached = (
                (Fraction(0), self.vertex_images[ed.u]),
                *self.edge_breaks.get(e, ()),
                (ed.length, self.vertex_images[ed.v]),
            )
            self._controls_cache[e] = cached
        return cached

    # -- evaluation

    def apply(self, x: PointRef) -> PointRef:
        self.domain.check_point(x)
        if x.is_vertex:
            return self.vertex_images[x.vertex]
        ctrl = self.controls(x.edge)
        for (t0, p0), (t1, p1) in zip(ctrl, ctrl[1:]):
            if t0 <= x.offset <= t1:
                if t0 == t1:
                    return p0
                d = dist(self.codomain, p0, p1)
                return point_along(
                    self.codomain, p0, p1, d * (x.offset - t0) / (t1 - t0)
                )
        raise GeometryError("offset not covered by controls")  # pragma: no cover

    def image(self, S: Subtree, _check_connected=True) -> Subtree:
        parts = []
        for v in S.vertices:
            parts.append(point_subtree(self.codomain, self.vertex_images[v]))
        for e, (a, b) in S.intervals.items():
            pts = [self.apply(self.domain.point(e, a))]
            for t, p in self.edge_breaks.get(e, ()):
                if a < t < b:
                    pts.append(p)
            pts.append(self.apply(self.domain.point(e, b)))
            for p0, p1 in zip(pts, pts[1:]):
                parts.append(geodesic(self.codomain, p0, p1))
        comps = union_subtrees(self.codomain, parts)
        if _check_connected and len(comps) != 1:
            raise GeometryError("image of a connected set came out disconnected")
        return comps[0] if len(comps) == 1 else _reassemble(self.codomain, comps)

    def pieces(self):
        """Domain partition on which the map is geodesic-linear."""
        out = []
        for e in range(len(self.domain.edges)):
            ctrl = self.controls(e)
            for (t0, _), (t1, _) in zip(ctrl, ctrl[1:]):
                out.append((e, t0, t1))
        return out

    # -- serialization

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "domain": self.domain.to_dict(),
            "codomain": self.codomain.to_dict(),
            "vertex_images": {
                v: p.to_dict() for v, p in sorted(self.vertex_images.items())
            },
            "edge_breaks": {
                str(e): [[format_rat(t), p.to_dict()] for t, p in brs]
                for e, brs in sorted(self.edge_breaks.items())
            },
        }

    @staticmethod
    def from_dict(d: Mapping) -> "TreeMap":
        return TreeMap(
            domain=Dendrite.from_dict(d["domain"]),
            codomain=Dendrite.from_dict(d["codomain"]),
            vertex_images={
                v: PointRef.from_dict(p) for v, p in d["vertex_images"].items()
            },
            edge_breaks={
                int(e): tuple((parse_rat(t), PointRef.from_dict(p)) for t, p in brs)
                for e, brs in d.get("edge_breaks", {}).items()
            },
        )


def _reassemble(D, comps):  # pragma: no cover - defensive
    return union_connected(D, comps)


def identity_map(D: Dendrite) -> TreeMap:
    return TreeMap(D, D, {v: PointRef(vertex=v) for v in D.vertices})


# ---------------------------------------------------------------------------
# composition (exact, materialized)


def compose(G, F) -> TreeMap:
    """The exact composition G after F as an explicit TreeMap.

    Breakpoints of the composite are F's breakpoints together with pullbacks
    of G's geodesic-linearity boundaries along each F-piece.
    """
    if F.codomain is not G.domain and F.codomain != G.domain:
        raise GeometryError("composition domains do not match")
    vertex_images = {v: G.apply(p) for v, p in F.vertex_images.items()}
    edge_breaks = {}
    for e in range(len(F.domain.edges)):
        ctrl = F.controls(e)
        brs = []
        for (t0, p0), (t1, p1) in zip(ctrl, ctrl[1:]):
            if 0 < t0:
                brs.append((t0, G.apply(p0)))
            d = dist(F.codomain, p0, p1)
            if d == 0:
                continue
            # arc positions where the composite changes geodesic: walk-leg
            # boundaries (vertex crossings) plus G's interior breakpoints
            cuts = []
            s_acc = Fraction(0)
            for ge, a, b in geodesic_walk(F.codomain, p0, p1):
                lo, hi = (a, b) if a <= b else (b, a)
                for gt, _gp in G.edge_breaks.get(ge, ()):
                    if lo < gt < hi:
                        cuts.append(s_acc + (gt - a if b > a else a - gt))
                s_acc += abs(b - a)
                if s_acc < d:
                    cuts.append(s_acc)
            for s in cuts:
                t = t0 + (t1 - t0) * s / d
                if t0 < t < t1:
                    brs.append((t, G.apply(F.apply(F.domain.point(e, t)))))
        brs.sort(key=lambda tp: tp[0])
        dedup = []
        for t, p in brs:
            if dedup and dedup[-1][0] == t:
                continue
            if 0 < t < F.domain.edge_length(e):
                dedup.append((t, p))
        if dedup:
            edge_breaks[e] = tuple(dedup)
    return TreeMap(F.domain, G.codomain, vertex_images, edge_breaks)


def iterate_apply(F, x: PointRef, n: int) -> PointRef:
    for _ in range(n):
        x = F.apply(x)
    return x


def iterate_image(F, S: Subtree, n: int) -> Subtree:
    for _ in range(n):
        S = F.image(S)
    return S


def orbit_images(F, S: Subtree, n: int) -> list[Subtree]:
    """[S, f(S), ..., f^n(S)] computed iteratively."""
    out = [S]
    for _ in range(n):
        out.append(F.image(out[-1]))
    return out


# ---------------------------------------------------------------------------
# point relation trichotomy


FIXED = "fixed"
EVADES = "evades"
ADMIRES = "admires"
JUMPS_OVER = "jumps_over"


def classify_relation(F, a: PointRef, x: PointRef) -> str:
    """Exactly one of fixed / evades / admires / jumps_over, for a != x."""
    if a == x:
        raise GeometryError("relation base point must differ from x")
    D = F.domain
    fx = F.apply(x)
    if fx == x:
        return FIXED
    # evades: f(x) strictly beyond x as seen from a, i.e. x on [a, f(x)]
    if dist(D, a, fx) == dist(D, a, x) + dist(D, x, fx):
        return EVADES
    # jumps over: a strictly between x and f(x)
    if (
        fx != a
        and dist(D, x, fx) == dist(D, x, a) + dist(D, a, fx)
    ):
        label = JUMPS_OVER
    else:
        label = ADMIRES
    if label == ADMIRES:
        reg = enclosed(D, a, x)
        if not contains_point(D, reg, fx):  # pragma: no cover - consistency
            raise GeometryError("trichotomy inconsistency")
    return label


# ---------------------------------------------------------------------------
# orbit decomposition at a finite horizon


@dataclass
class OrbitDecomposition:
    """Finite-horizon cyclic structure of a set orbit.

    ``conclusive`` is False when no self-intersection of the image sequence
    appears within the horizon; all other fields are then empty.
    """

    conclusive: bool
    horizon: int
    n0: Optional[int] = None
    k: Optional[int] = None
    K_sets: list = field(default_factory=list)
    K_stabilized: list = field(default_factory=list)
    r: Optional[int] = None
    L_sets: list = field(default_factory=list)
    cyclic_ok: Optional[bool] = None


def orbit_decomposition(F, E: Subtree, horizon: int) -> OrbitDecomposition:
    """Least n0, then least k, with f^n0(E) meeting f^(n0+k)(E); K/L structure.

    K_i accumulates the images f^(n0+i+jk)(E) for j = 0, 1, ... until two
    successive unions agree (stabilized) or indices pass the horizon; the
    per-set flag records which happened.  L_j are the components of the
    accumulated orbit of f^n0(E).
    """
    if horizon < 1:
        raise GeometryError("horizon must be >= 1")
    imgs = orbit_images(F, E, horizon)
    found = None
    for n0 in range(horizon):
        for k in range(1, horizon - n0 + 1):
            if subtrees_intersect(imgs[n0], imgs[n0 + k]):
                found = (n0, k)
                break
        if found:
            break
    if not found:
        return OrbitDecomposition(conclusive=False, horizon=horizon)
    n0, k = found
    D = F.codomain
    K_sets, K_flags = [], []
    for i in range(k):
        # full union of the residue-class images up to the horizon; the flag
        # records whether the union had already stopped growing
        acc = imgs[n0 + i]
        grew_at = 0
        j = 1
        while n0 + i + j * k <= horizon:
            nxt = union_connected(D, [acc, imgs[n0 + i + j * k]])
            if nxt != acc:
                grew_at = j
            acc = nxt
            j += 1
        K_sets.append(acc)
        K_flags.append(grew_at < j - 1 if j > 1 else True)
    # cyclic permutation check, meaningful on stabilized sets
    cyclic_ok = None
    if all(K_flags):
        cyclic_ok = True
        for i in range(k - 1):
            if F.image(K_sets[i]) != K_sets[i + 1]:
                cyclic_ok = False
        if not _subtree_subset(F.image(K_sets[k - 1]), K_sets[0]):
            cyclic_ok = False
    L_sets = union_subtrees(D, K_sets)
    r = len(L_sets)
    if k % r != 0:
        raise GeometryError("component count does not divide the cycle length")
    # L_j is the component containing K_j (j < r); this ordering satisfies
    # the cyclic image relations because L_j is the union of the K_{j+lr}
    L_ordered = []
    for j in range(r):
        L_ordered.append(next(L for L in L_sets if subtrees_intersect(L, K_sets[j])))
    if len({id(L) for L in L_ordered}) != r:  # pragma: no cover - consistency
        raise GeometryError("component ordering failed")
    return OrbitDecomposition(
        conclusive=True,
        horizon=horizon,
        n0=n0,
        k=k,
        K_sets=K_sets,
        K_stabilized=K_flags,
        r=r,
        L_sets=L_ordered,
        cyclic_ok=cyclic_ok,
    )


def _subtree_subset(A: Subtree, B: Subtree) -> bool:
    if not A.vertices <= B.vertices:
        return False
    for e, (a, b) in A.intervals.items():
        iv = B.intervals.get(e)
        if iv is None or a < iv[0] or b > iv[1]:
            return False
    return True


def m_min(F, E: Subtree, horizon: int) -> Optional[int]:
    """Least l >= 1 with f^n(E) meeting f^(n+l)(E) for some n <= horizon.

    Returns None when inconclusive at the horizon.
    """
    imgs = orbit_images(F, E, 2 * horizon)
    best = None
    for l in range(1, horizon + 1):
        for n in range(0, horizon + 1):
            if subtrees_intersect(imgs[n], imgs[n + l]):
                return l
    return best
