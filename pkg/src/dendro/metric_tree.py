"""Finite metric trees with exact rational geometry.

A :class:`Dendrite` is a finite tree whose edges carry positive rational
lengths; it stands in for an infinite dendrite truncated at a stated depth
(the generator provenance lives in ``descriptor``).  Points are
:class:`PointRef` values (a vertex, or an interior position on an edge) and
closed connected subsets are :class:`Subtree` values.  Every operation here
is a pure function of immutable values and returns exact rationals.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence

from dendro.serialize import format_rat, parse_rat

Rat = Fraction


class GeometryError(ValueError):
    """Invalid point/edge references or malformed subtree operations."""


# ---------------------------------------------------------------------------
# core value types


@dataclass(frozen=True)
class Edge:
    u: str
    v: str
    length: Fraction

    def __post_init__(self):
        if self.length <= 0:
            raise GeometryError(f"edge {self.u}-{self.v} has nonpositive length")


@dataclass(frozen=True)
class PointRef:
    """A position on a dendrite: a vertex, or (edge index, interior offset).

    Canonical form: offsets 0 and full-length are always stored as the
    endpoint vertex, so equality of PointRefs is equality of points.
    """

    vertex: Optional[str] = None
    edge: Optional[int] = None
    offset: Optional[Fraction] = None

    def __post_init__(self):
        if (self.vertex is None) == (self.edge is None):
            raise GeometryError("PointRef needs exactly one of vertex / edge+offset")
        if self.edge is not None and self.offset is None:
            raise GeometryError("edge PointRef needs an offset")

    @property
    def is_vertex(self) -> bool:
        return self.vertex is not None

    def to_dict(self) -> dict:
        if self.is_vertex:
            return {"vertex": self.vertex}
        return {"edge": self.edge, "offset": format_rat(self.offset)}

    @staticmethod
    def from_dict(d: Mapping) -> "PointRef":
        if "vertex" in d:
            return PointRef(vertex=str(d["vertex"]))
        return PointRef(edge=int(d["edge"]), offset=parse_rat(d["offset"]))


class Dendrite:
    """A finite metric tree: named vertices, indexed edges, marked points."""

    def __init__(self, vertices, edges, marked=None, descriptor=None):
        self.vertices: tuple[str, ...] = tuple(str(v) for v in vertices)
        self.edges: tuple[Edge, ...] = tuple(
            e if isinstance(e, Edge) else Edge(str(e[0]), str(e[1]), Fraction(e[2]))
            for e in edges
        )
        self.marked: dict[str, PointRef] = dict(marked or {})
        self.descriptor: Optional[dict] = descriptor
        self._adj: dict[str, list[tuple[int, str]]] = {v: [] for v in self.vertices}
        self._vdist_cache: dict[str, dict[str, Fraction]] = {}
        self._parent_cache: dict[str, dict[str, tuple[int, str]]] = {}
        self._validate()

    # -- construction / validation

    def _validate(self):
        if len(set(self.vertices)) != len(self.vertices):
            raise GeometryError("duplicate vertex ids")
        vset = set(self.vertices)
        for i, e in enumerate(self.edges):
            if e.u not in vset or e.v not in vset:
                raise GeometryError(f"edge {i} references unknown vertex")
            if e.u == e.v:
                raise GeometryError(f"edge {i} is a loop")
            self._adj[e.u].append((i, e.v))
            self._adj[e.v].append((i, e.u))
        # connected and acyclic
        if self.vertices:
            seen = {self.vertices[0]}
            stack = [self.vertices[0]]
            used_edges = set()
            while stack:
                v = stack.pop()
                for ei, w in self._adj[v]:
                    if ei in used_edges:
                        continue
                    used_edges.add(ei)
                    if w in seen:
                        raise GeometryError("edge graph contains a cycle")
                    seen.add(w)
                    stack.append(w)
            if len(seen) != len(self.vertices):
                raise GeometryError("edge graph is not connected")
        for name, p in self.marked.items():
            self.check_point(p)

    def __eq__(self, other):
        return (
            isinstance(other, Dendrite)
            and self.vertices == other.vertices
            and self.edges == other.edges
            and self.marked == other.marked
        )

    def __repr__(self):
        return f"Dendrite({len(self.vertices)} vertices, {len(self.edges)} edges)"

    # -- basic accessors

    def edge_length(self, i: int) -> Fraction:
        return self.edges[i].length

    def degree(self, v: str) -> int:
        return len(self._adj[v])

    def neighbors(self, v: str):
        return self._adj[v]

    def check_point(self, p: PointRef) -> PointRef:
        if p.is_vertex:
            if p.vertex not in self._adj:
                raise GeometryError(f"unknown vertex {p.vertex!r}")
            return p
        if not (0 <= p.edge < len(self.edges)):
            raise GeometryError(f"unknown edge index {p.edge}")
        if not (0 < p.offset < self.edges[p.edge].length):
            raise GeometryError(
                f"offset {p.offset} out of range for edge {p.edge}"
            )
        return p

    def point(self, edge: int, offset) -> PointRef:
        """Canonical point on an edge; endpoint offsets collapse to vertices."""
        offset = Fraction(offset)
        e = self.edges[edge]
        if offset < 0 or offset > e.length:
            raise GeometryError(f"offset {offset} outside edge {edge}")
        if offset == 0:
            return PointRef(vertex=e.u)
        if offset == e.length:
            return PointRef(vertex=e.v)
        return PointRef(edge=edge, offset=offset)

    def resolve_marked(self, name: str) -> PointRef:
        try:
            return self.marked[name]
        except KeyError:
            raise GeometryError(f"no marked point {name!r}") from None

    # -- vertex-level shortest paths (tree: unique)

    def _bfs(self, src: str):
        if src in self._vdist_cache:
            return self._vdist_cache[src], self._parent_cache[src]
        dist = {src: Fraction(0)}
        parent: dict[str, tuple[int, str]] = {}
        stack = [src]
        while stack:
            v = stack.pop()
            for ei, w in self._adj[v]:
                if w not in dist:
                    dist[w] = dist[v] + self.edges[ei].length
                    parent[w] = (ei, v)
                    stack.append(w)
        self._vdist_cache[src] = dist
        self._parent_cache[src] = parent
        return dist, parent

    def vdist(self, u: str, w: str) -> Fraction:
        return self._bfs(u)[0][w]

    def vertex_path(self, u: str, w: str) -> list[int]:
        """Edge indices along the unique vertex path from u to w."""
        _, parent = self._bfs(u)
        path = []
        cur = w
        while cur != u:
            ei, prev = parent[cur]
            path.append(ei)
            cur = prev
        path.reverse()
        return path

    def total_length(self) -> Fraction:
        return sum((e.length for e in self.edges), Fraction(0))

    # -- serialization

    def to_dict(self) -> dict:
        d = {
            "vertices": list(self.vertices),
            "edges": [
                {"u": e.u, "v": e.v, "len": format_rat(e.length)} for e in self.edges
            ],
            "marked": {k: p.to_dict() for k, p in sorted(self.marked.items())},
        }
        if self.descriptor is not None:
            d["descriptor"] = self.descriptor
        return d

    @staticmethod
    def from_dict(d: Mapping) -> "Dendrite":
        return Dendrite(
            vertices=[str(v) for v in d["vertices"]],
            edges=[(e["u"], e["v"], parse_rat(e["len"])) for e in d["edges"]],
            marked={k: PointRef.from_dict(v) for k, v in d.get("marked", {}).items()},
            descriptor=d.get("descriptor"),
        )


@dataclass(frozen=True)
class Subtree:
    """A closed connected subset of a dendrite.

    ``intervals`` maps edge index to the closed interval of that edge
    contained in the set; ``vertices`` lists the contained tree vertices.
    Canonical invariants (enforced by :func:`make_subtree`): interval ends at
    offset 0 / full length imply the endpoint vertex is listed, and a
    degenerate interval occurs only as a lone interior point.
    """

    vertices: frozenset
    intervals: dict

    def is_empty(self) -> bool:
        return not self.vertices and not self.intervals

    def is_degenerate(self) -> bool:
        if self.intervals:
            return (
                not self.vertices
                and len(self.intervals) == 1
                and all(a == b for a, b in self.intervals.values())
            )
        return len(self.vertices) <= 1

    def single_point(self) -> PointRef:
        if self.vertices:
            return PointRef(vertex=next(iter(self.vertices)))
        (e, (a, _b)), = self.intervals.items()
        return PointRef(edge=e, offset=a)

    def to_dict(self) -> dict:
        return {
            "vertices": sorted(self.vertices),
            "intervals": {
                str(e): [format_rat(a), format_rat(b)]
                for e, (a, b) in sorted(self.intervals.items())
            },
        }

    @staticmethod
    def from_dict(d: Mapping) -> "Subtree":
        return Subtree(
            vertices=frozenset(str(v) for v in d.get("vertices", [])),
            intervals={
                int(e): (parse_rat(ab[0]), parse_rat(ab[1]))
                for e, ab in d.get("intervals", {}).items()
            },
        )


def make_subtree(D: Dendrite, intervals=None, vertices=()) -> Subtree:
    """Normalize raw interval/vertex data into the canonical Subtree form."""
    ivs: dict[int, tuple[Fraction, Fraction]] = {}
    verts = set(vertices)
    for e, (a, b) in (intervals or {}).items():
        a, b = Fraction(a), Fraction(b)
        if a > b:
            a, b = b, a
        L = D.edge_length(e)
        if a < 0 or b > L:
            raise GeometryError(f"interval [{a},{b}] outside edge {e}")
        if a == b:
            # degenerate piece: a vertex, or a lone interior point
            if a == 0:
                verts.add(D.edges[e].u)
            elif a == L:
                verts.add(D.edges[e].v)
            else:
                ivs[e] = (a, b)
            continue
        ivs[e] = (a, b)
        if a == 0:
            verts.add(D.edges[e].u)
        if b == L:
            verts.add(D.edges[e].v)
    # a lone interior point may not coexist with anything else
    degenerate = {e for e, (a, b) in ivs.items() if a == b}
    if degenerate and (len(ivs) > 1 or verts):
        raise GeometryError("degenerate interval inside a larger subtree")
    return Subtree(vertices=frozenset(verts), intervals=ivs)


def point_subtree(D: Dendrite, p: PointRef) -> Subtree:
    D.check_point(p)
    if p.is_vertex:
        return Subtree(vertices=frozenset([p.vertex]), intervals={})
    return Subtree(vertices=frozenset(), intervals={p.edge: (p.offset, p.offset)})


def full_subtree(D: Dendrite) -> Subtree:
    return Subtree(
        vertices=frozenset(D.vertices),
        intervals={i: (Fraction(0), e.length) for i, e in enumerate(D.edges)},
    )


def is_full(D: Dendrite, S: Subtree) -> bool:
    return S == full_subtree(D)


def contains_point(D: Dendrite, S: Subtree, p: PointRef) -> bool:
    if p.is_vertex:
        return p.vertex in S.vertices
    iv = S.intervals.get(p.edge)
    return iv is not None and iv[0] <= p.offset <= iv[1]


# ---------------------------------------------------------------------------
# distances and geodesics


def _exits(D: Dendrite, p: PointRef):
    """(vertex, cost-to-reach-it) pairs through which paths from p leave."""
    if p.is_vertex:
        return ((p.vertex, Fraction(0)),)
    e = D.edges[p.edge]
    return ((e.u, p.offset), (e.v, e.length - p.offset))


def dist(D: Dendrite, x: PointRef, y: PointRef) -> Fraction:
    """Path-metric distance; exact rational."""
    D.check_point(x)
    D.check_point(y)
    if x == y:
        return Fraction(0)
    if not x.is_vertex and not y.is_vertex and x.edge == y.edge:
        return abs(x.offset - y.offset)
    return min(
        cx + D.vdist(u, w) + cy for u, cx in _exits(D, x) for w, cy in _exits(D, y)
    )


def geodesic_walk(D: Dendrite, x: PointRef, y: PointRef):
    """The unique arc from x to y as directed legs (edge, t_from, t_to)."""
    D.check_point(x)
    D.check_point(y)
    if x == y:
        return []
    if not x.is_vertex and not y.is_vertex and x.edge == y.edge:
        return [(x.edge, x.offset, y.offset)]
    best = None
    for u, cx in _exits(D, x):
        for w, cy in _exits(D, y):
            d = cx + D.vdist(u, w) + cy
            if best is None or d < best[0]:
                best = (d, u, w)
    _, u, w = best
    legs = []
    if not x.is_vertex:
        target = Fraction(0) if D.edges[x.edge].u == u else D.edges[x.edge].length
        if target != x.offset:
            legs.append((x.edge, x.offset, target))
    cur = u
    for ei in D.vertex_path(u, w):
        e = D.edges[ei]
        if e.u == cur:
            legs.append((ei, Fraction(0), e.length))
            cur = e.v
        else:
            legs.append((ei, e.length, Fraction(0)))
            cur = e.u
    if not y.is_vertex:
        start = Fraction(0) if D.edges[y.edge].u == w else D.edges[y.edge].length
        if start != y.offset:
            legs.append((y.edge, start, y.offset))
    return legs


def geodesic(D: Dendrite, x: PointRef, y: PointRef) -> Subtree:
    """The arc [x, y]; the single point {x} when x == y."""
    if x == y:
        return point_subtree(D, x)
    ivs: dict[int, list] = {}
    for e, a, b in geodesic_walk(D, x, y):
        lo, hi = (a, b) if a <= b else (b, a)
        if e in ivs:
            lo = min(lo, ivs[e][0])
            hi = max(hi, ivs[e][1])
        ivs[e] = [lo, hi]
    return make_subtree(D, {e: (lo, hi) for e, (lo, hi) in ivs.items()})


def point_along(D: Dendrite, x: PointRef, y: PointRef, s: Fraction) -> PointRef:
    """The point of [x, y] at distance s from x (0 <= s <= dist)."""
    s = Fraction(s)
    if s == 0:
        return x
    for e, a, b in geodesic_walk(D, x, y):
        leg = abs(b - a)
        if s <= leg:
            t = a + s if b > a else a - s
            return D.point(e, t)
        s -= leg
    if s == 0:
        return y
    raise GeometryError("distance exceeds geodesic length")


def h1_measure(S: Subtree) -> Fraction:
    """Total edge-interval length (Hausdorff 1-measure in the path metric)."""
    return sum((b - a for a, b in S.intervals.values()), Fraction(0))


# ---------------------------------------------------------------------------
# subtree algebra


def subtree_points(D: Dendrite, S: Subtree) -> list[PointRef]:
    """Canonical boundary sample: interval ends plus isolated vertices."""
    pts = [PointRef(vertex=v) for v in sorted(S.vertices)]
    for e, (a, b) in sorted(S.intervals.items()):
        pts.append(D.point(e, a))
        pts.append(D.point(e, b))
    seen, out = set(), []
    for p in pts:
        if p not in seen:
            seen.add(p)
            out.append(p)
    return out


def subtrees_intersect(S1: Subtree, S2: Subtree) -> bool:
    if S1.vertices & S2.vertices:
        return True
    for e, (a, b) in S1.intervals.items():
        iv = S2.intervals.get(e)
        if iv and a <= iv[1] and iv[0] <= b:
            return True
    return False


def intersect_subtrees(D: Dendrite, S1: Subtree, S2: Subtree) -> Subtree:
    """Exact intersection (connected by hereditary unicoherence)."""
    ivs = {}
    for e, (a, b) in S1.intervals.items():
        iv = S2.intervals.get(e)
        if iv:
            lo, hi = max(a, iv[0]), min(b, iv[1])
            if lo <= hi:
                ivs[e] = (lo, hi)
    return make_subtree(D, ivs, S1.vertices & S2.vertices)


def union_subtrees(D: Dendrite, parts: Sequence[Subtree]) -> list[Subtree]:
    """Union of connected subtrees, returned as its connected components.

    Parts are grouped by pairwise intersection; within a group the per-edge
    intervals merge into single intervals (valid in a tree because two
    intersecting connected subtrees cannot leave a gap on an edge).
    """
    parts = [p for p in parts if not p.is_empty()]
    if not parts:
        return []
    parent = list(range(len(parts)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(len(parts)):
        for j in range(i + 1, len(parts)):
            if find(i) != find(j) and subtrees_intersect(parts[i], parts[j]):
                parent[find(i)] = find(j)
    groups: dict[int, list[Subtree]] = {}
    for i, p in enumerate(parts):
        groups.setdefault(find(i), []).append(p)
    out = []
    for group in groups.values():
        ivs: dict[int, list] = {}
        verts = set()
        for p in group:
            verts |= p.vertices
            for e, (a, b) in p.intervals.items():
                if e in ivs:
                    ivs[e][0] = min(ivs[e][0], a)
                    ivs[e][1] = max(ivs[e][1], b)
                else:
                    ivs[e] = [a, b]
        out.append(make_subtree(D, {e: (a, b) for e, (a, b) in ivs.items()}, verts))
    out.sort(key=lambda s: (sorted(s.vertices), sorted(s.intervals.items())))
    return out


def union_connected(D: Dendrite, parts: Sequence[Subtree]) -> Subtree:
    comps = union_subtrees(D, parts)
    if len(comps) != 1:
        raise GeometryError(f"union has {len(comps)} components, expected 1")
    return comps[0]


def span_subtree(D: Dendrite, points: Sequence[PointRef]) -> Subtree:
    """Smallest closed subtree containing all the points."""
    if not points:
        raise GeometryError("span of no points")
    base = points[0]
    parts = [point_subtree(D, base)]
    parts.extend(geodesic(D, base, p) for p in points[1:])
    return union_connected(D, parts)


def project(D: Dendrite, E: Subtree, x: PointRef) -> PointRef:
    """First-point map: the unique point of E nearest to x."""
    if E.is_empty():
        raise GeometryError("projection onto empty subtree")
    if contains_point(D, E, x):
        return x
    anchor = subtree_points(D, E)[0]
    for e, a, b in geodesic_walk(D, x, anchor):
        iv = E.intervals.get(e)
        lo, hi = (a, b) if a <= b else (b, a)
        hits = []
        if iv:
            ilo, ihi = max(lo, iv[0]), min(hi, iv[1])
            if ilo <= ihi:
                # nearest end of the overlap in walk direction
                hits.append(ilo if b > a else ihi)
        # vertex entry: the far endpoint of the leg may be a vertex of E
        if not hits:
            endpoint = D.point(e, b)
            if endpoint.is_vertex and endpoint.vertex in E.vertices:
                hits.append(b)
        if hits:
            return D.point(e, hits[0])
    if contains_point(D, E, anchor):
        return anchor
    raise GeometryError("projection walk failed")  # pragma: no cover


def subtree_dist(D: Dendrite, S1: Subtree, S2: Subtree) -> Fraction:
    """Exact set distance between two closed subtrees (0 iff they meet)."""
    if subtrees_intersect(S1, S2):
        return Fraction(0)
    q0 = subtree_points(D, S1)[0]
    p2 = project(D, S2, q0)
    p1 = project(D, S1, p2)
    return dist(D, p1, p2)


def subtree_diam(D: Dendrite, S: Subtree) -> Fraction:
    """Diameter via double sweep over extremal candidate points."""
    pts = subtree_points(D, S)
    if len(pts) <= 1:
        return Fraction(0)
    p0 = pts[0]
    p1 = max(pts, key=lambda p: dist(D, p0, p))
    return max(dist(D, p1, p) for p in pts)


# ---------------------------------------------------------------------------
# separation sets


def _side_subtree(D: Dendrite, root: str, blocked_edge: int) -> Subtree:
    """Closed component of D minus one open edge, flooded from `root`."""
    verts = {root}
    ivs = {}
    stack = [root]
    while stack:
        v = stack.pop()
        for ei, w in D._adj[v]:
            if ei == blocked_edge or ei in ivs:
                continue
            ivs[ei] = (Fraction(0), D.edge_length(ei))
            if w not in verts:
                verts.add(w)
                stack.append(w)
    return make_subtree(D, ivs, verts)


def upper_set(D: Dendrite, a: PointRef, x: PointRef) -> Subtree:
    """All points y with x on the arc [a, y]; the whole tree when a == x."""
    D.check_point(a)
    D.check_point(x)
    if a == x:
        return full_subtree(D)
    if x.is_vertex:
        towards = _towards(D, x, a)
        parts = [point_subtree(D, x)]
        for ei, w in D._adj[x.vertex]:
            if ei == towards:
                continue
            side = _side_subtree(D, w, ei)
            L = D.edge_length(ei)
            stub = make_subtree(D, {ei: (Fraction(0), L)})
            parts.append(union_connected(D, [stub, side]))
        return union_connected(D, parts)
    e = D.edges[x.edge]
    t = x.offset
    if not a.is_vertex and a.edge == x.edge:
        a_on_u_side = a.offset < t
    else:
        via_u = dist(D, a, PointRef(vertex=e.u)) + t
        a_on_u_side = via_u == dist(D, a, x)
    if a_on_u_side:
        stub = make_subtree(D, {x.edge: (t, e.length)})
        side = _side_subtree(D, e.v, x.edge)
    else:
        stub = make_subtree(D, {x.edge: (Fraction(0), t)})
        side = _side_subtree(D, e.u, x.edge)
    return union_connected(D, [stub, side])


def _towards(D: Dendrite, x: PointRef, a: PointRef) -> Optional[int]:
    """Edge index at vertex x through which the arc to a leaves (None: a==x)."""
    if a == x:
        return None
    walk = geodesic_walk(D, x, a)
    return walk[0][0]


def enclosed(D: Dendrite, a: PointRef, b: PointRef) -> Subtree:
    """Arc [a, b] together with everything hanging off its interior."""
    if a == b:
        return point_subtree(D, a)
    arc = geodesic(D, a, b)
    parts = [arc]
    dec = components_minus(D, arc)
    for comp, attach in zip(dec.components, dec.boundary_points):
        if attach != a and attach != b:
            parts.append(comp)
    return union_connected(D, parts)


@dataclass(frozen=True)
class ComplementDecomposition:
    """Closed components of D minus a subtree, with their attachment points.

    ``components[i]`` is the closure of the i-th component and
    ``boundary_points[i]`` its singleton boundary inside E.  ``is_whole``
    flags the degenerate call with E = D (no components).
    """

    components: tuple
    boundary_points: tuple
    is_whole: bool

    def escape_boundary(self) -> list[PointRef]:
        seen, out = set(), []
        for p in self.boundary_points:
            if p not in seen:
                seen.add(p)
                out.append(p)
        return out

    def grouped(self, D: Dendrite) -> dict[PointRef, Subtree]:
        """B_c sets: unions of component closures sharing an attachment."""
        groups: dict[PointRef, list] = {}
        for comp, c in zip(self.components, self.boundary_points):
            groups.setdefault(c, []).append(comp)
        return {c: union_connected(D, parts) for c, parts in groups.items()}


def components_minus(D: Dendrite, E: Subtree) -> ComplementDecomposition:
    """Components of D minus E (closures), each with its boundary point."""
    if E.is_empty():
        raise GeometryError("complement of the empty set is not decomposable")
    if is_full(D, E):
        return ComplementDecomposition((), (), True)

    pieces = []  # (edge, lo, hi, boundary PointRef|None, left_open, right_open)
    for ei, e in enumerate(D.edges):
        iv = E.intervals.get(ei)
        if iv is None:
            if e.u in E.vertices:
                iv = (Fraction(0), Fraction(0))
            elif e.v in E.vertices:
                iv = (e.length, e.length)
        if iv is None:
            pieces.append((ei, Fraction(0), e.length, None))
            continue
        lo, hi = iv
        if lo > 0:
            pieces.append((ei, Fraction(0), lo, D.point(ei, lo)))
        if hi < e.length:
            pieces.append((ei, hi, e.length, D.point(ei, hi)))

    # union-find over free vertices and pieces
    nodes: dict = {}
    parent: list[int] = []

    def add(key):
        nodes[key] = len(parent)
        parent.append(len(parent))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(i, j):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj

    for v in D.vertices:
        if v not in E.vertices:
            add(("v", v))
    for idx, (ei, lo, hi, bnd) in enumerate(pieces):
        add(("p", idx))
        e = D.edges[ei]
        if lo == 0 and e.u not in E.vertices:
            union(nodes[("p", idx)], nodes[("v", e.u)])
        if hi == e.length and e.v not in E.vertices:
            union(nodes[("p", idx)], nodes[("v", e.v)])

    comps: dict[int, dict] = {}
    for key, idx in nodes.items():
        comps.setdefault(find(idx), {"pieces": [], "verts": set(), "bnd": []})
        entry = comps[find(idx)]
        if key[0] == "v":
            entry["verts"].add(key[1])
        else:
            ei, lo, hi, bnd = pieces[key[1]]
            entry["pieces"].append((ei, lo, hi))
            if bnd is not None:
                entry["bnd"].append(bnd)

    out_comps, out_bnd = [], []
    for entry in comps.values():
        ivs = {ei: (lo, hi) for ei, lo, hi in entry["pieces"]}
        sub = make_subtree(D, ivs, entry["verts"])
        bnds = entry["bnd"]
        if not bnds:
            # attachment through a vertex of E (piece offsets hit 0 or length)
            attach = None
            for ei, (lo, hi) in ivs.items():
                e = D.edges[ei]
                if lo == 0 and e.u in E.vertices:
                    attach = PointRef(vertex=e.u)
                if hi == e.length and e.v in E.vertices:
                    attach = PointRef(vertex=e.v)
            if attach is None:
                raise GeometryError("component without attachment point")
            bnds = [attach]
        uniq = {b for b in bnds}
        if len(uniq) != 1:
            raise GeometryError("component with non-singleton boundary")
        c = bnds[0]
        closure = union_connected(D, [sub, point_subtree(D, c)])
        out_comps.append(closure)
        out_bnd.append(c)
    order = sorted(
        range(len(out_comps)),
        key=lambda i: (out_bnd[i].to_dict().get("vertex") or "",
                       str(out_bnd[i].to_dict()),
                       sorted(out_comps[i].intervals)),
    )
    return ComplementDecomposition(
        tuple(out_comps[i] for i in order),
        tuple(out_bnd[i] for i in order),
        False,
    )


def point_order(D: Dendrite, x: PointRef) -> int:
    """Number of components of D minus {x} in the truncated tree."""
    D.check_point(x)
    if x.is_vertex:
        return D.degree(x.vertex)
    return 2


def ideal_point_order(D: Dendrite, x: PointRef):
    """Order in the ideal generated object, when the descriptor settles it.

    Returns ``math.inf`` for the center of an infinite-order family, the
    truncated order otherwise.
    """
    import math

    desc = D.descriptor or {}
    if desc.get("family") == "omega_star":
        center = D.marked.get("center")
        if center is not None and x == center:
            return math.inf
    return point_order(D, x)


def subtree_boundary_contains(D: Dendrite, E: Subtree, p: PointRef) -> bool:
    """True when p lies in the topological boundary of E in D."""
    if not contains_point(D, E, p):
        return False
    if not p.is_vertex:
        lo, hi = E.intervals[p.edge]
        return p.offset in (lo, hi)
    # vertex: boundary unless every incident direction stays in E
    for ei, w in D._adj[p.vertex]:
        iv = E.intervals.get(ei)
        if iv is None:
            return True
        e = D.edges[ei]
        if e.u == p.vertex and iv[0] > 0:
            return True
        if e.v == p.vertex and iv[1] < e.length:
            return True
        if iv[0] == iv[1]:
            return True
    return False


def ball(D: Dendrite, x: PointRef, radius) -> Subtree:
    """Closed metric ball as a spanned subtree, by exact edge clipping."""
    radius = Fraction(radius)
    if radius < 0:
        raise GeometryError("negative radius")
    D.check_point(x)
    ivs = {}
    verts = set()
    for ei, e in enumerate(D.edges):
        if not x.is_vertex and x.edge == ei:
            lo = max(Fraction(0), x.offset - radius)
            hi = min(e.length, x.offset + radius)
            ivs[ei] = (lo, hi)
            continue
        du = dist(D, x, PointRef(vertex=e.u))
        dv = dist(D, x, PointRef(vertex=e.v))
        spans = []
        if du <= radius:
            spans.append((Fraction(0), min(e.length, radius - du)))
        if dv <= radius:
            spans.append((max(Fraction(0), e.length - (radius - dv)), e.length))
        if not spans:
            continue
        if len(spans) == 2:
            # both reachable: in a tree the two clips always merge
            lo = min(s[0] for s in spans)
            hi = max(s[1] for s in spans)
            if spans[0][1] < spans[1][0]:
                raise GeometryError("ball split an edge; tree invariant broken")
            spans = [(lo, hi)]
        lo, hi = spans[0]
        if lo < hi:
            ivs[ei] = (lo, hi)
        elif lo == hi:
            verts_or_point = D.point(ei, lo)
            if verts_or_point.is_vertex:
                verts.add(verts_or_point.vertex)
    for v in D.vertices:
        if dist(D, x, PointRef(vertex=v)) <= radius:
            verts.add(v)
    if not ivs and not verts:
        return point_subtree(D, x)
    return make_subtree(D, ivs, verts)


def refine_at(D: Dendrite, points: Iterable[PointRef]):
    """Split edges at the given interior points.

    Returns (new dendrite, point mapping old->new as a callable).  New
    vertices get deterministic names ``cut:<edge>:<offset>``.
    """
    by_edge: dict[int, list[Fraction]] = {}
    for p in points:
        D.check_point(p)
        if not p.is_vertex:
            by_edge.setdefault(p.edge, []).append(p.offset)
    new_edges = []
    # map: old edge -> list of (old_lo, old_hi, new_edge_index)
    segments: dict[int, list[tuple[Fraction, Fraction, int]]] = {}
    vertices = list(D.vertices)
    for ei, e in enumerate(D.edges):
        cuts = sorted(set(by_edge.get(ei, [])))
        segs = []
        prev_off, prev_v = Fraction(0), e.u
        for c in cuts:
            name = f"cut:{ei}:{format_rat(c)}"
            vertices.append(name)
            segs.append((prev_off, c, len(new_edges)))
            new_edges.append(Edge(prev_v, name, c - prev_off))
            prev_off, prev_v = c, name
        segs.append((prev_off, e.length, len(new_edges)))
        new_edges.append(Edge(prev_v, e.v, e.length - prev_off))
        segments[ei] = segs

    def map_point(p: PointRef) -> PointRef:
        if p.is_vertex:
            return p
        for lo, hi, nei in segments[p.edge]:
            if lo <= p.offset <= hi:
                return D2.point(nei, p.offset - lo)
        raise GeometryError("unmapped point")  # pragma: no cover

    D2 = Dendrite(
        vertices,
        new_edges,
        marked={},
        descriptor=D.descriptor,
    )
    D2.marked.update({k: map_point(v) for k, v in D.marked.items()})
    for name, p in D2.marked.items():
        D2.check_point(p)
    return D2, map_point


def subtree_components(D: Dendrite, S: Subtree) -> list[Subtree]:
    """Connected components of an arbitrary closed interval/vertex set."""
    parts = []
    for e, (a, b) in S.intervals.items():
        parts.append(make_subtree(D, {e: (a, b)}))
    for v in S.vertices:
        parts.append(point_subtree(D, PointRef(vertex=v)))
    return union_subtrees(D, parts)
