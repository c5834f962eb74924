"""Exact selfmaps of finite trees fixing a prescribed arc or point.

The arc construction: split the tree into the base arc A plus finitely many
bushes hanging off it, reassign the metric so bush k carries total measure
(1-q) q^k (the base gets (1-q)), and send each bush k onto the region E_k
spanned by the arc from its root to a nearer, larger-bush root together with
all smaller bushes rooted between them (E_1 is the whole tree).  Each bush
map factors as: normalized-distance zigzag onto [0,1], a constant-slope
sawtooth onto a blown-up interval in which every involved root is widened
into a block of that bush's measure, then a block-wise surjection whose
blocks replay expanding walk surjections onto the bushes and whose gaps ride
along the base arc.  Points of A stay fixed; every bush root stays fixed.

An ideal version of this map is exact; at a finite truncation the base arc
has interior, so only bush pieces can cover, and the verifier certifies
coverage per piece together with the strictly decreasing target chain.

All maps here expose ``domain``/``codomain``/``apply``/``image``/``pieces``
and so interoperate with the chaos and orbit machinery.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from dendro.length_expanding import (
    BuildError,
    build_phi_on_subtree,
    initial_lap_count,
    sawtooth_image,
    sawtooth_value,
)
from dendro.metric_tree import (
    Dendrite,
    Edge,
    GeometryError,
    PointRef,
    Subtree,
    contains_point,
    dist,
    full_subtree,
    geodesic,
    h1_measure,
    intersect_subtrees,
    is_full,
    make_subtree,
    point_subtree,
    refine_at,
    subtree_points,
    union_connected,
    union_subtrees,
)
from dendro.serialize import format_rat, parse_rat
from dendro.tree_map import TreeMap

F0 = Fraction(0)
F1 = Fraction(1)


# ---------------------------------------------------------------------------
# charts between a tree and a rescaled / extracted copy


@dataclass
class PieceChart:
    """Edge-wise affine identification of a whole-edge region with a copy."""

    outer: Dendrite
    inner: Dendrite
    to_inner: dict  # outer edge -> (inner edge, scale)
    to_outer: dict  # inner edge -> (outer edge, scale)

    def fwd_point(self, p: PointRef) -> PointRef:
        if p.is_vertex:
            return p
        ie, s = self.to_inner[p.edge]
        return self.inner.point(ie, p.offset * s)

    def back_point(self, p: PointRef) -> PointRef:
        if p.is_vertex:
            return p
        oe, s = self.to_outer[p.edge]
        return self.outer.point(oe, p.offset * s)

    def fwd_subtree(self, S: Subtree) -> Subtree:
        ivs = {}
        for e, (a, b) in S.intervals.items():
            ie, s = self.to_inner[e]
            ivs[ie] = (a * s, b * s)
        return make_subtree(self.inner, ivs, S.vertices)

    def back_subtree(self, S: Subtree) -> Subtree:
        ivs = {}
        for e, (a, b) in S.intervals.items():
            oe, s = self.to_outer[e]
            ivs[oe] = (a * s, b * s)
        return make_subtree(self.outer, ivs, S.vertices)


def extract_region(D: Dendrite, S: Subtree, new_lengths=None,
                   descriptor=None) -> PieceChart:
    """Standalone dendrite for a whole-edge subtree; vertices keep names."""
    for e, (a, b) in S.intervals.items():
        if a != 0 or b != D.edge_length(e):
            raise GeometryError("extraction needs a whole-edge subtree")
    vertices = sorted(S.vertices)
    edges = []
    to_inner, to_outer = {}, {}
    for e in sorted(S.intervals):
        ed = D.edges[e]
        L = (new_lengths or {}).get(e, ed.length)
        to_inner[e] = (len(edges), L / ed.length)
        to_outer[len(edges)] = (e, ed.length / L)
        edges.append(Edge(ed.u, ed.v, L))
    inner = Dendrite(vertices, edges, descriptor=descriptor)
    return PieceChart(outer=D, inner=inner, to_inner=to_inner, to_outer=to_outer)


# ---------------------------------------------------------------------------
# decomposition


@dataclass
class Bush:
    index: int  # 1-based; larger index = smaller assigned measure
    root: str
    subtree: Subtree
    measure: Fraction


@dataclass
class BushDecomposition:
    space: Dendrite  # refined so the base and all bushes are whole-edge sets
    base: Subtree  # the arc A (or single point) inside `space`
    base_kind: str  # "arc" | "point"
    bushes: list

    @property
    def roots(self):
        return [b.root for b in self.bushes]


def _is_path(D: Dendrite, S: Subtree) -> bool:
    deg = {}
    for e in S.intervals:
        ed = D.edges[e]
        deg[ed.u] = deg.get(ed.u, 0) + 1
        deg[ed.v] = deg.get(ed.v, 0) + 1
    return all(d <= 2 for d in deg.values())


def _arc_end_vertices(D: Dendrite, S: Subtree):
    deg = {}
    for e in S.intervals:
        ed = D.edges[e]
        deg[ed.u] = deg.get(ed.u, 0) + 1
        deg[ed.v] = deg.get(ed.v, 0) + 1
    ends = sorted(v for v, d in deg.items() if d == 1)
    if len(ends) != 2:
        raise GeometryError("subtree is not an arc")
    return ends


def decompose_bushes(D: Dendrite, A) -> BushDecomposition:
    """Bushes hanging off a base arc or point, largest first.

    For an arc base, complement components sharing an attachment point are
    merged (each bush meets the arc in exactly one root); for a point base
    the raw components are kept separate.  The base must be a proper subset:
    the whole space is rejected.  Nowhere-density of the base is a property
    of the ideal object a truncation cannot witness; here the builder only
    requires a nonempty complement.
    """
    from dendro.metric_tree import components_minus

    if isinstance(A, PointRef):
        D.check_point(A)
        if not A.is_vertex:
            D2, mp = refine_at(D, [A])
            return decompose_bushes(D2, mp(A))
        base = point_subtree(D, A)
        dec = components_minus(D, base)
        if dec.is_whole or not dec.components:
            raise GeometryError("point base must have a nonempty complement")
        bushes = [
            (comp, A.vertex) for comp in dec.components
        ]
        kind = "point"
        space = D
    else:
        if A.is_degenerate():
            return decompose_bushes(D, A.single_point())
        if is_full(D, A):
            raise GeometryError("base equals the whole space")
        # refine so the arc's endpoints (and hence all attachments) are vertices
        cut_pts = []
        for e, (a, b) in A.intervals.items():
            for t in (a, b):
                if 0 < t < D.edge_length(e):
                    cut_pts.append(D.point(e, t))
        if cut_pts:
            A_ends = _arc_endpoints_any(D, A)
            space, mp = refine_at(D, cut_pts)
            A = geodesic(space, mp(A_ends[0]), mp(A_ends[1]))
        else:
            space = D
        if not _is_path(space, A):
            raise GeometryError("base must be an arc")
        for e, (a, b) in A.intervals.items():
            if a != 0 or b != space.edge_length(e):
                raise GeometryError("arc base must be a whole-edge subtree")
        dec = components_minus(space, A)
        if dec.is_whole or not dec.components:
            raise GeometryError("arc base must have a nonempty complement")
        grouped = dec.grouped(space)
        bushes = []
        for c, comp in grouped.items():
            if not c.is_vertex:
                raise GeometryError("bush attached at a non-vertex point")
            bushes.append((comp, c.vertex))
        base = A
        kind = "arc"
    bushes.sort(key=lambda cr: (-h1_measure(cr[0]), cr[1]))
    out = [
        Bush(index=i + 1, root=root, subtree=comp, measure=h1_measure(comp))
        for i, (comp, root) in enumerate(bushes)
    ]
    return BushDecomposition(space=space, base=base, base_kind=kind, bushes=out)


def _arc_endpoints_any(D: Dendrite, A: Subtree):
    """Extremal points of an arc subtree (vertices or interval ends)."""
    pts = subtree_points(D, A)
    if len(pts) == 1:
        return pts[0], pts[0]
    p0 = pts[0]
    p1 = max(pts, key=lambda p: dist(D, p0, p))
    p2 = max(pts, key=lambda p: dist(D, p1, p))
    return p1, p2


# ---------------------------------------------------------------------------
# metric reassignment


@dataclass
class AssignedDecomposition:
    space: Dendrite  # reassigned lengths
    base: Subtree
    base_kind: str
    bushes: list  # measures now equal the assigned weights
    q: Fraction
    lam0: Fraction
    weights: dict  # bush index -> weight
    deficit: Fraction
    chart: PieceChart  # from the decomposition space to the reassigned one

    @property
    def total_measure(self) -> Fraction:
        return h1_measure(full_subtree(self.space))


def assign_metric(dec: BushDecomposition, q) -> AssignedDecomposition:
    """Rescale: base to (1-q), bush k to (1-q) q^k; report the deficit."""
    q = Fraction(q)
    if not (0 < q < 1):
        raise GeometryError("need 0 < q < 1")
    lam = {b.index: (1 - q) * q**b.index for b in dec.bushes}
    lam0 = 1 - q
    scale = {}
    for b in dec.bushes:
        s = lam[b.index] / b.measure
        for e in b.subtree.intervals:
            scale[e] = s
    base_measure = h1_measure(dec.base)
    if dec.base_kind == "arc":
        s0 = lam0 / base_measure
        for e in dec.base.intervals:
            scale[e] = s0
    D = dec.space
    new_edges = [
        Edge(e.u, e.v, e.length * scale.get(i, F1)) for i, e in enumerate(D.edges)
    ]
    space = Dendrite(
        [v for v in D.vertices],
        new_edges,
        descriptor=D.descriptor,
    )
    to_inner = {i: (i, scale.get(i, F1)) for i in range(len(D.edges))}
    to_outer = {i: (i, 1 / scale.get(i, F1)) for i in range(len(D.edges))}
    chart = PieceChart(outer=D, inner=space, to_inner=to_inner, to_outer=to_outer)
    space.marked.update({k: chart.fwd_point(p) for k, p in D.marked.items()})
    bushes = [
        Bush(
            index=b.index,
            root=b.root,
            subtree=chart.fwd_subtree(b.subtree),
            measure=lam[b.index],
        )
        for b in dec.bushes
    ]
    K = len(dec.bushes)
    deficit = q ** (K + 1)
    return AssignedDecomposition(
        space=space,
        base=chart.fwd_subtree(dec.base),
        base_kind=dec.base_kind,
        bushes=bushes,
        q=q,
        lam0=lam0 if dec.base_kind == "arc" else F0,
        weights=lam,
        deficit=deficit,
        chart=chart,
    )


# ---------------------------------------------------------------------------
# target planning


@dataclass
class BlowupPlan:
    targets: dict  # k -> target index l_k < k (k >= 2)
    positions: dict  # bush index -> arclength of its root along the base
    members: dict  # k -> sorted list of bush indices in N_k

    def chain(self, k: int) -> list:
        out = [k]
        while out[-1] > 1:
            out.append(self.targets[out[-1]])
        return out


def _base_positions(asg: AssignedDecomposition) -> dict:
    """Arclength of every bush root along the base arc, from one end."""
    D = asg.space
    if asg.base_kind == "point":
        return {b.index: F0 for b in asg.bushes}
    end1, _ = _arc_endpoints_any(D, asg.base)
    pos = {}
    for b in asg.bushes:
        pos[b.index] = dist(D, end1, PointRef(vertex=b.root))
    return pos


def plan_targets(asg: AssignedDecomposition) -> BlowupPlan:
    """Nearest earlier root for every bush k >= 2, ties to the smaller index."""
    if len(asg.bushes) < 2:
        raise GeometryError("target planning needs at least two bushes")
    D = asg.space
    pos = _base_positions(asg)
    roots = {b.index: b.root for b in asg.bushes}
    targets = {}
    members = {}
    for b in asg.bushes:
        k = b.index
        if k == 1:
            members[1] = sorted(roots)
            continue
        best = None
        for j in range(1, k):
            d = abs(pos[j] - pos[k])
            if best is None or d < best[0] or (d == best[0] and j < best[1]):
                best = (d, j)
        targets[k] = best[1]
        lk = best[1]
        lo, hi = sorted((pos[k], pos[lk]))
        inside = [
            h
            for h in roots
            if h > k and lo < pos[h] < hi
        ]
        members[k] = sorted({k, lk, *inside})
    return BlowupPlan(targets=targets, positions=pos, members=members)


# ---------------------------------------------------------------------------
# per-bush stages


@dataclass
class BushZigzag:
    """Normalized-distance sawtooth from a bush onto the unit arc."""

    space: Dendrite
    bush: Subtree
    root: str
    reach: Fraction  # max distance from the root within the bush
    laps: int
    codomain: Dendrite

    @property
    def domain(self):
        return self.space

    def _norm(self, x: PointRef) -> Fraction:
        return dist(self.space, PointRef(vertex=self.root), x) / self.reach

    def apply(self, x: PointRef) -> PointRef:
        val = sawtooth_value(F1, self.laps, F0, self._norm(x))
        return self.codomain.point(0, val)

    def image(self, S: Subtree) -> Subtree:
        lo = hi = None
        for p in subtree_points(self.space, S):
            n = self._norm(p)
            lo = n if lo is None else min(lo, n)
            hi = n if hi is None else max(hi, n)
        a, b = sawtooth_image(F1, self.laps, F0, lo, hi)
        return make_subtree(self.codomain, {0: (a, b)})

    def pieces(self):
        """Per-edge linearity intervals: cut at fold pullbacks."""
        out = []
        root_ref = PointRef(vertex=self.root)
        for e in sorted(self.bush.intervals):
            ed = self.space.edges[e]
            nu = dist(self.space, root_ref, PointRef(vertex=ed.u)) / self.reach
            nv = dist(self.space, root_ref, PointRef(vertex=ed.v)) / self.reach
            cuts = [F0]
            lo, hi = sorted((nu, nv))
            j0 = int(lo * self.laps) + 1
            j = j0
            while Fraction(j, self.laps) < hi:
                ft = Fraction(j, self.laps)
                t = (ft - nu) / (nv - nu) * ed.length
                cuts.append(t)
                j += 1
            cuts.append(ed.length)
            cuts = sorted(set(cuts))
            for a, b in zip(cuts, cuts[1:]):
                out.append((e, a, b))
        return out

    def to_dict(self):
        return {
            "kind": "bush_zigzag",
            "bush": self.bush.to_dict(),
            "root": self.root,
            "reach": format_rat(self.reach),
            "laps": self.laps,
        }


@dataclass
class SawtoothArcMap:
    """Constant-slope triangle wave between two single-edge arcs."""

    domain: Dendrite
    codomain: Dendrite
    laps: int
    start: Fraction

    def _params(self):
        dl = self.domain.edge_length(0)
        cl = self.codomain.edge_length(0)
        return dl, cl

    def apply(self, x: PointRef) -> PointRef:
        dl, cl = self._params()
        t = F0 if x.is_vertex and x.vertex == self.domain.edges[0].u else (
            dl if x.is_vertex else x.offset
        )
        val = sawtooth_value(cl, self.laps, self.start, t / dl)
        return self.codomain.point(0, val)

    def image(self, S: Subtree) -> Subtree:
        dl, cl = self._params()
        lo = hi = None
        for p in subtree_points(self.domain, S):
            t = F0 if (p.is_vertex and p.vertex == self.domain.edges[0].u) else (
                dl if p.is_vertex else p.offset
            )
            lo = t if lo is None else min(lo, t)
            hi = t if hi is None else max(hi, t)
        a, b = sawtooth_image(cl, self.laps, self.start, lo / dl, hi / dl)
        return make_subtree(self.codomain, {0: (a, b)})

    def to_dict(self):
        return {
            "kind": "sawtooth_arc",
            "laps": self.laps,
            "start": format_rat(self.start),
            "codomain_length": format_rat(self.codomain.edge_length(0)),
        }


# ---------------------------------------------------------------------------
# the glued exact map


@dataclass
class ExactBushPart:
    bush: Subtree
    root: str
    psi: BushZigzag
    nu: SawtoothArcMap
    g: TreeMap
    region_image: Subtree  # E_k, memoized image of the whole bush

    def apply(self, x: PointRef) -> PointRef:
        return self.g.apply(self.nu.apply(self.psi.apply(x)))

    def image(self, S: Subtree) -> Subtree:
        iv = self.nu.image(self.psi.image(S))
        if iv.is_degenerate():  # pragma: no cover - nondegenerate inputs only
            return point_subtree(self.g.codomain, self.g.apply(iv.single_point()))
        ((a, b),) = iv.intervals.values()
        if a == F0 and b == self.nu.codomain.edge_length(0):
            return self.region_image
        return self.g.image(iv)


class GluedExactMap:
    """Identity on the base arc, expanding bush-to-region maps elsewhere."""

    kind = "glued_exact"

    def __init__(self, space, base, parts, manifest=None):
        self.domain = space
        self.codomain = space
        self.base = base
        self.parts = parts
        self.manifest = manifest or {}

    def _part_for(self, x: PointRef):
        for part in self.parts:
            if contains_point(self.domain, part.bush, x):
                return part
        return None

    def apply(self, x: PointRef) -> PointRef:
        self.domain.check_point(x)
        if contains_point(self.domain, self.base, x):
            return x
        part = self._part_for(x)
        if part is None:
            raise GeometryError("point outside base and bushes")
        return part.apply(x)

    def image(self, S: Subtree, _check_connected=True) -> Subtree:
        parts_out = []
        base_cap = intersect_subtrees(self.domain, S, self.base)
        if not base_cap.is_empty():
            parts_out.append(base_cap)
        for part in self.parts:
            C = intersect_subtrees(self.domain, S, part.bush)
            if C.is_empty():
                continue
            if C.is_degenerate():
                parts_out.append(
                    point_subtree(self.domain, part.apply(C.single_point()))
                )
            else:
                parts_out.append(part.image(C))
        comps = union_subtrees(self.domain, parts_out)
        if _check_connected and len(comps) != 1:
            raise GeometryError("image of a connected set came out disconnected")
        return comps[0]

    def pieces(self):
        """Coarse certification partition: bush linearity pieces + base edges."""
        out = []
        for part in self.parts:
            for e, a, b in part.psi.pieces():
                out.append((e, a, b, "bush"))
        for e, (a, b) in sorted(self.base.intervals.items()):
            out.append((e, a, b, "base"))
        return out

    def to_dict(self):
        return {
            "kind": self.kind,
            "space": self.domain.to_dict(),
            "base": self.base.to_dict(),
            "parts": [
                {
                    "bush": part.bush.to_dict(),
                    "root": part.root,
                    "psi": part.psi.to_dict(),
                    "nu": part.nu.to_dict(),
                    "g": part.g.to_dict(),
                }
                for part in self.parts
            ],
            "manifest": self.manifest,
        }

    @staticmethod
    def from_dict(d):
        space = Dendrite.from_dict(d["space"])
        base = Subtree.from_dict(d["base"])
        unit = Dendrite(["0", "1"], [("0", "1", F1)])
        parts = []
        for pd in d["parts"]:
            bush = Subtree.from_dict(pd["bush"])
            psi = BushZigzag(
                space=space,
                bush=bush,
                root=pd["psi"]["root"],
                reach=parse_rat(pd["psi"]["reach"]),
                laps=int(pd["psi"]["laps"]),
                codomain=unit,
            )
            g = TreeMap.from_dict(pd["g"])
            nu = SawtoothArcMap(
                domain=unit,
                codomain=g.domain,
                laps=int(pd["nu"]["laps"]),
                start=parse_rat(pd["nu"]["start"]),
            )
            region_image = g.image(full_subtree(g.domain))
            parts.append(
                ExactBushPart(
                    bush=bush, root=pd["root"], psi=psi, nu=nu, g=g,
                    region_image=region_image,
                )
            )
        return GluedExactMap(space, base, parts, manifest=d.get("manifest"))


# ---------------------------------------------------------------------------
# builders


def _arc_dendrite(length: Fraction, name: str) -> Dendrite:
    return Dendrite([f"{name}:0", f"{name}:1"], [(f"{name}:0", f"{name}:1", length)])


def _build_phi_for_bush(asg, bush, rho, seed):
    """Expanding walk surjection I -> bush inside the assigned space."""
    laps = initial_lap_count(rho)
    rho = Fraction(rho)
    lam = bush.measure
    for attempt in range(4):
        phi = build_phi_on_subtree(asg.space, bush.subtree, bush.root, laps)
        w = _check_bush_expanding(phi, bush.subtree, rho * lam, 60, seed)
        if w is None:
            return phi, laps
        laps *= 2
    raise BuildError(f"no expanding walk for bush {bush.index}", witness=w)


def _check_bush_expanding(phi, bush, rho_scaled, samples, seed):
    from dendro.length_expanding import DenseFamily, LEWitness

    fam = DenseFamily("all_closed_intervals", seed=seed)
    for J in fam.sample(phi.domain, samples, seed):
        img = phi.image(J)
        if img == bush:
            continue
        if h1_measure(img) < rho_scaled * h1_measure(J):
            return LEWitness(
                set_=J,
                measure=h1_measure(J),
                image_measure=h1_measure(img),
                rho=rho_scaled,
            )
    return None


def _check_bush_psi(psi, phi, bush_measure, rho, samples, seed):
    """psi dichotomy over walk-surjection images, in normalized bush units."""
    from dendro.length_expanding import DenseFamily, LEWitness

    rho = Fraction(rho)
    fam = DenseFamily("all_closed_intervals", seed=seed)
    for J in fam.sample(phi.domain, samples, seed):
        C = phi.image(J)
        if C.is_degenerate():
            continue
        img = psi.image(C)
        if is_full(psi.codomain, img):
            continue
        if h1_measure(img) < rho * (h1_measure(C) / bush_measure):
            return LEWitness(
                set_=C,
                measure=h1_measure(C) / bush_measure,
                image_measure=h1_measure(img),
                rho=rho,
            )
    return None


def build_exact(D: Dendrite, A, q=Fraction(1, 2), rho=Fraction(6, 5), seed: int = 0):
    """Selfmap fixing A pointwise whose bush pieces expand onto regions E_k.

    A is a Subtree arc, a marked-pair name prefix (resolved via marked points
    ``<A>_left`` / ``<A>_right``), or a PointRef.  Returns a GluedExactMap on
    the reassigned-metric copy of D (arc case) or a TreeMap / glued map on D
    itself (point case); the build manifest records weights, targets, lap
    counts and region measures.
    """
    q, rho = Fraction(q), Fraction(rho)
    if isinstance(A, str):
        A = geodesic(
            D, D.resolve_marked(f"{A}_left"), D.resolve_marked(f"{A}_right")
        )
    dec = decompose_bushes(D, A)
    if dec.base_kind == "point":
        return _build_exact_point(dec, rho, seed)
    asg = assign_metric(dec, q)
    if len(asg.bushes) >= 2:
        plan = plan_targets(asg)
    else:
        plan = BlowupPlan(targets={}, positions=_base_positions(asg), members={1: [1]})
    unit = Dendrite(["0", "1"], [("0", "1", F1)])
    # per-bush expanding surjections
    phis, phi_laps = {}, {}
    for b in asg.bushes:
        phi, laps = _build_phi_for_bush(asg, b, rho, seed)
        phis[b.index], phi_laps[b.index] = phi, laps
    root_ref = {b.index: PointRef(vertex=b.root) for b in asg.bushes}
    bush_by_index = {b.index: b for b in asg.bushes}
    parts = []
    manifest_parts = []
    base_len = h1_measure(asg.base)
    base_end1, base_end2 = (
        _arc_endpoints_any(asg.space, asg.base)
        if asg.base_kind == "arc"
        else (None, None)
    )

    def base_point_at(s: Fraction) -> PointRef:
        from dendro.metric_tree import point_along

        return point_along(asg.space, base_end1, base_end2, s)

    for b in asg.bushes:
        k = b.index
        members = plan.members.get(k, [k])
        pos = plan.positions
        # block layout along the blown-up interval, ordered by base position
        ordered = sorted(members, key=lambda h: (pos[h], h))
        if k == 1:
            lo, hi_pos = F0, base_len  # region 1 rides the whole base
        else:
            lo = min(pos[k], pos[plan.targets[k]])
            hi_pos = max(pos[k], pos[plan.targets[k]])
        blocks = []
        acc = F0
        prev_pos = lo
        for h in ordered:
            gap = pos[h] - prev_pos
            start = acc + gap
            blocks.append((h, start))
            acc = start + bush_by_index[h].measure
            prev_pos = pos[h]
        total = acc + (hi_pos - prev_pos)
        depth_arc = _arc_dendrite(total, f"J{k}")
        # g: blocks replay the bush surjections, gaps ride the base arc
        g_breaks = []
        if blocks[0][1] > 0:
            g_breaks.append((F0, base_point_at(lo)))
        for h, start in blocks:
            phi_h = phis[h]
            for t, p in phi_h.controls(0):
                g_breaks.append((start + t * bush_by_index[h].measure, p))
        if acc < total:
            g_breaks.append((total, base_point_at(hi_pos)))
        g_breaks.sort(key=lambda tp: tp[0])
        v0 = g_breaks[0][1]
        v1 = g_breaks[-1][1]
        inner = tuple(
            (t, p) for t, p in g_breaks if F0 < t < total
        )
        g = TreeMap(
            depth_arc,
            asg.space,
            {depth_arc.edges[0].u: v0, depth_arc.edges[0].v: v1},
            {0: inner},
        )
        region_image = g.image(full_subtree(depth_arc))
        # the sawtooth start: the block of bush k itself
        k_start = next(start for h, start in blocks if h == k)
        nu_laps = _nu_lap_count(total)
        nu = SawtoothArcMap(domain=unit, codomain=depth_arc, laps=nu_laps,
                            start=k_start)
        reach = max(
            dist(asg.space, root_ref[k], PointRef(vertex=v))
            for v in b.subtree.vertices
        )
        psi = BushZigzag(
            space=asg.space,
            bush=b.subtree,
            root=b.root,
            reach=reach,
            laps=phi_laps[k],
            codomain=unit,
        )
        w = _check_bush_psi(psi, phis[k], b.measure, rho, 60, seed)
        if w is not None:
            psi = BushZigzag(
                space=asg.space, bush=b.subtree, root=b.root, reach=reach,
                laps=phi_laps[k] * 2, codomain=unit,
            )
            w2 = _check_bush_psi(psi, phis[k], b.measure, rho, 60, seed)
            if w2 is not None:
                raise BuildError(
                    f"no expanding distance zigzag for bush {k}", witness=w2
                )
        parts.append(
            ExactBushPart(
                bush=b.subtree,
                root=b.root,
                psi=psi,
                nu=nu,
                g=g,
                region_image=region_image,
            )
        )
        manifest_parts.append(
            {
                "bush": k,
                "root": b.root,
                "weight": format_rat(b.measure),
                "target": plan.targets.get(k),
                "members": list(ordered),
                "phi_laps": phi_laps[k],
                "nu_laps": nu_laps,
                "region_measure": format_rat(h1_measure(region_image)),
            }
        )
    manifest = {
        "q": format_rat(q),
        "rho": format_rat(rho),
        "base_measure": format_rat(h1_measure(asg.base)),
        "deficit": format_rat(asg.deficit),
        "parts": manifest_parts,
    }
    glued = GluedExactMap(asg.space, asg.base, parts, manifest=manifest)
    glued.assigned = asg
    glued.plan = plan
    _validate_fixed_points(glued)
    return glued


def _nu_lap_count(total: Fraction) -> int:
    """Even stretch count: non-covering subintervals expand by at least 2."""
    need = Fraction(4) / total
    laps = max(2, int(need) + (0 if need == int(need) else 1))
    return laps + (laps % 2)


def _validate_fixed_points(glued: GluedExactMap):
    D = glued.domain
    for part in glued.parts:
        root = PointRef(vertex=part.root)
        if glued.apply(root) != root:
            raise BuildError(f"root {part.root} not fixed")
    for p in subtree_points(D, glued.base):
        if glued.apply(p) != p:
            raise BuildError("base point moved")


def _build_exact_point(dec: BushDecomposition, rho, seed):
    """Point base: per-bush exact maps glued at the fixed point.

    Arc-shaped bushes get the slope-2 fold onto themselves; branched bushes
    get the composed pair of expanding surjections through the unit interval.
    Single-edge bushes assemble into one explicit TreeMap.
    """
    D = dec.space
    (root_name,) = dec.base.vertices
    all_single_edges = all(len(b.subtree.intervals) == 1 for b in dec.bushes)
    if all_single_edges:
        vertex_images = {root_name: PointRef(vertex=root_name)}
        edge_breaks = {}
        for b in dec.bushes:
            (e,) = b.subtree.intervals
            ed = D.edges[e]
            far = ed.v if ed.u == b.root else ed.u
            vertex_images[far] = PointRef(vertex=b.root)
            mid = ed.length / 2
            edge_breaks[e] = ((mid, PointRef(vertex=far)),)
        Fm = TreeMap(D, D, vertex_images, edge_breaks)
        Fm.manifest = {
            "base": root_name,
            "parts": [
                {"bush": b.index, "root": b.root, "style": "fold"}
                for b in dec.bushes
            ],
        }
        return Fm
    # general point case: conjugate a built pair through an extracted copy
    from dendro.length_expanding import build_pair

    parts = []
    manifest_parts = []
    for b in dec.bushes:
        chart = extract_region(D, b.subtree)
        built = build_pair(
            chart.inner, PointRef(vertex=b.root), rho, samples=80, seed=seed
        )
        scale_chart = _measure_chart(chart.inner, built.space)
        parts.append(
            ConjugatePart(
                region=b.subtree,
                charts=(chart, scale_chart),
                inner=_ComposedPair(built.psi, built.phi),
            )
        )
        manifest_parts.append(
            {"bush": b.index, "root": b.root, "style": "pair",
             "laps": built.laps}
        )
    glued = GluedPointMap(D, dec.base, parts,
                          manifest={"parts": manifest_parts})
    return glued


def _measure_chart(outer: Dendrite, inner: Dendrite) -> PieceChart:
    """Chart between two copies with identical combinatorics."""
    to_inner, to_outer = {}, {}
    for i, (eo, ei) in enumerate(zip(outer.edges, inner.edges)):
        to_inner[i] = (i, ei.length / eo.length)
        to_outer[i] = (i, eo.length / ei.length)
    return PieceChart(outer=outer, inner=inner, to_inner=to_inner,
                      to_outer=to_outer)


class _ComposedPair:
    """phi after psi: an expanding selfmap fixing the walk base point."""

    def __init__(self, psi, phi):
        self.psi, self.phi = psi, phi
        self.domain = psi.domain
        self.codomain = phi.codomain

    def apply(self, x):
        return self.phi.apply(self.psi.apply(x))

    def image(self, S):
        return self.phi.image(self.psi.image(S))


@dataclass
class ConjugatePart:
    region: Subtree
    charts: tuple  # successive PieceCharts from the glued space inward
    inner: object

    def _fwd(self, p):
        for ch in self.charts:
            p = ch.fwd_point(p)
        return p

    def _back(self, p):
        for ch in reversed(self.charts):
            p = ch.back_point(p)
        return p

    def apply(self, x):
        return self._back(self.inner.apply(self._fwd(x)))

    def image(self, S):
        for ch in self.charts:
            S = ch.fwd_subtree(S)
        S = self.inner.image(S)
        for ch in reversed(self.charts):
            S = ch.back_subtree(S)
        return S


class GluedPointMap:
    """Identity at the shared fixed point, conjugated exact maps per bush."""

    kind = "glued_point"

    def __init__(self, space, base, parts, manifest=None):
        self.domain = space
        self.codomain = space
        self.base = base
        self.parts = parts
        self.manifest = manifest or {}

    def apply(self, x: PointRef) -> PointRef:
        if contains_point(self.domain, self.base, x):
            return x
        for part in self.parts:
            if contains_point(self.domain, part.region, x):
                return part.apply(x)
        raise GeometryError("point outside every part")

    def image(self, S: Subtree, _check_connected=True) -> Subtree:
        parts_out = []
        cap = intersect_subtrees(self.domain, S, self.base)
        if not cap.is_empty():
            parts_out.append(cap)
        for part in self.parts:
            C = intersect_subtrees(self.domain, S, part.region)
            if C.is_empty():
                continue
            if C.is_degenerate():
                parts_out.append(point_subtree(self.domain, part.apply(C.single_point())))
            else:
                parts_out.append(part.image(C))
        comps = union_subtrees(self.domain, parts_out)
        if _check_connected and len(comps) != 1:
            raise GeometryError("image of a connected set came out disconnected")
        return comps[0]

    def pieces(self):
        out = []
        for part in self.parts:
            for e, (a, b) in sorted(part.region.intervals.items()):
                out.append((e, a, b, "bush"))
        return out


# ---------------------------------------------------------------------------
# exactness verification


@dataclass
class CoverRow:
    edge: int
    lo: Fraction
    hi: Fraction
    kind: str  # "bush" | "base"
    covered_at: Optional[int]  # least n with f^n(piece) = whole space


@dataclass
class ExactnessCertificate:
    rows: list
    n_max: int
    chain_ok: bool
    chains: dict

    @property
    def all_bush_pieces_covered(self) -> bool:
        return all(r.covered_at is not None for r in self.rows if r.kind == "bush")

    @property
    def max_cover_time(self) -> Optional[int]:
        times = [r.covered_at for r in self.rows if r.covered_at is not None]
        return max(times) if times else None

    def to_dict(self):
        return {
            "n_max": self.n_max,
            "chain_ok": self.chain_ok,
            "chains": {str(k): v for k, v in sorted(self.chains.items())},
            "rows": [
                {
                    "edge": r.edge,
                    "lo": format_rat(r.lo),
                    "hi": format_rat(r.hi),
                    "kind": r.kind,
                    "covered_at": r.covered_at,
                }
                for r in self.rows
            ],
            "all_bush_pieces_covered": self.all_bush_pieces_covered,
        }


def verify_exact(Fm, n_max: int) -> ExactnessCertificate:
    """Least full-cover time per certification piece, plus chain validation.

    Pieces on the fixed base arc can never cover (the map is the identity
    there); they are reported with ``covered_at = None`` and excluded from
    the pass criterion.  The target chain k -> l_k -> ... must be strictly
    decreasing down to 1.
    """
    if n_max < 1:
        raise GeometryError("n_max must be >= 1")
    D = Fm.domain
    whole = full_subtree(D)
    rows = []
    for piece in Fm.pieces():
        e, a, b, kind = piece
        S = make_subtree(D, {e: (a, b)})
        covered = None
        if kind == "bush":
            cur = S
            for n in range(1, n_max + 1):
                cur = Fm.image(cur)
                if cur == whole:
                    covered = n
                    break
        rows.append(CoverRow(edge=e, lo=a, hi=b, kind=kind, covered_at=covered))
    chains = {}
    chain_ok = True
    plan = getattr(Fm, "plan", None)
    if plan is not None and plan.targets:
        for k in sorted(plan.targets):
            chain = plan.chain(k)
            chains[k] = chain
            if any(x <= y for x, y in zip(chain, chain[1:])):
                chain_ok = False
            if chain[-1] != 1 or len(chain) > len(plan.positions):
                chain_ok = False
    return ExactnessCertificate(rows=rows, n_max=n_max, chain_ok=chain_ok,
                                chains=chains)


# ---------------------------------------------------------------------------
# step-6 style growth outcome, for sampled dichotomy checks


def growth_outcome(Fm: GluedExactMap, C: Subtree, rho) -> str:
    """Classify the image of a bush test set.

    Returns "covers_bush" when the image contains a whole bush,
    "expands" when its measure grew by at least rho^2 and it stays inside a
    single bush, and "expands_into_base" for the truncation-only outcome of
    landing inside the fixed arc with the same measure growth.
    """
    rho = Fraction(rho)
    img = Fm.image(C)
    for part in Fm.parts:
        if _subtree_contains(img, part.bush):
            return "covers_bush"
    grew = h1_measure(img) >= rho * rho * h1_measure(C)
    if not grew:
        return "no_growth"
    if _subtree_contains(Fm.base, img):
        return "expands_into_base"
    for part in Fm.parts:
        if _subtree_contains(part.bush, img):
            return "expands"
    return "expands_mixed"


def _subtree_contains(big: Subtree, small: Subtree) -> bool:
    if not small.vertices <= big.vertices:
        return False
    for e, (a, b) in small.intervals.items():
        iv = big.intervals.get(e)
        if iv is None or a < iv[0] or b > iv[1]:
            return False
    return True


def _contains_subtree(big, small):
    return _subtree_contains(big, small)


# ---------------------------------------------------------------------------
# counterexample assembly: generically-chaotic-but-not-uniformly-sensitive


def build_gch_not_eps(D: Dendrite, A_or_point, q=Fraction(1, 2),
                      rho=Fraction(6, 5), seed: int = 0):
    """Glue exact pieces so every neighborhood scrambles but diameters shrink.

    Point form: the base point must have infinite order in the ideal object
    (generator descriptor); each complement component maps exactly onto
    itself fixing the point.  Arc form: nested subarcs A_1 = A > A_2 > ...
    shrink toward an interior anchor; the teeth rooted at distance between
    consecutive radii join piece E_j, each piece carries an exact map fixing
    its subarc, and the pieces glue along the identity on A.
    """
    from dendro.metric_tree import ideal_point_order
    import math

    if isinstance(A_or_point, PointRef):
        if ideal_point_order(D, A_or_point) != math.inf:
            raise GeometryError(
                "point form needs a point of infinite ideal order"
            )
        return build_exact(D, A_or_point, q=q, rho=rho, seed=seed)
    # arc form
    A = A_or_point
    if isinstance(A, str):
        A = geodesic(D, D.resolve_marked(f"{A}_left"), D.resolve_marked(f"{A}_right"))
    dec0 = decompose_bushes(D, A)
    space0 = dec0.space
    anchor0 = space0.marked.get("origin")
    if anchor0 is None:
        raise GeometryError("arc form needs a marked 'origin' anchor on the base")
    radius0 = max(
        dist(space0, anchor0, PointRef(vertex=b.root)) for b in dec0.bushes
    )

    def shell_of(d: Fraction) -> int:
        if d == 0:
            return 1
        j, radius = 1, radius0
        while radius / 2 >= d:
            radius /= 2
            j += 1
        return j

    shells: dict[int, list] = {}
    for b in dec0.bushes:
        d = dist(space0, anchor0, PointRef(vertex=b.root))
        shells.setdefault(shell_of(d), []).append(b.root)
    # refine so every shell's clipped arc ends at vertices
    ends0 = _arc_endpoints_any(space0, dec0.base)
    cut_pts = []
    for j in shells:
        radius = radius0 / 2 ** (j - 1)
        for end in ends0:
            reach = min(radius, dist(space0, anchor0, end))
            from dendro.metric_tree import point_along

            p = point_along(space0, anchor0, end, reach)
            if not p.is_vertex:
                cut_pts.append(p)
    if cut_pts:
        space, mp = refine_at(space0, cut_pts)
        base = geodesic(space, mp(ends0[0]), mp(ends0[1]))
    else:
        space, mp = space0, lambda p: p
        base = dec0.base
    anchor = space.marked["origin"]
    dec = decompose_bushes(space, base)
    roots_by_shell: dict[int, list] = {}
    for b in dec.bushes:
        d = dist(space, anchor, PointRef(vertex=b.root))
        roots_by_shell.setdefault(shell_of(d), []).append(b)
    ends = _arc_endpoints_any(space, base)
    pieces = []
    manifest = []
    for j in sorted(roots_by_shell):
        radius = radius0 / 2 ** (j - 1)
        sub_arc = _clip_arc(space, base, anchor, ends, radius)
        members = roots_by_shell[j]
        region = union_connected(space, [sub_arc] + [b.subtree for b in members])
        chart = extract_region(space, region)
        inner_arc = chart.fwd_subtree(sub_arc)
        inner_map = build_exact(chart.inner, inner_arc, q=q, rho=rho, seed=seed)
        scale_chart = _measure_chart(chart.inner, inner_map.domain)
        pieces.append(
            ConjugatePart(
                region=region,
                charts=(chart, scale_chart),
                inner=inner_map,
            )
        )
        manifest.append(
            {
                "piece": j,
                "bush_roots": sorted(b.root for b in members),
                "arc_radius": format_rat(radius),
                "region_measure": format_rat(h1_measure(region)),
            }
        )
    glued = GluedPieceMap(space, base, pieces, manifest={"pieces": manifest})
    return glued


def _clip_arc(space, base, anchor, ends, radius):
    """Subarc of the base within the given distance of the anchor."""
    from dendro.metric_tree import point_along

    clip_pts = []
    for end in ends:
        reach = min(radius, dist(space, anchor, end))
        clip_pts.append(point_along(space, anchor, end, reach))
    clipped = geodesic(space, clip_pts[0], clip_pts[1])
    if clipped.is_degenerate():
        raise GeometryError("clipped arc degenerated")
    return clipped


class GluedPieceMap:
    """Nested invariant pieces glued along a common fixed arc."""

    kind = "glued_pieces"

    def __init__(self, space, base, parts, manifest=None):
        self.domain = space
        self.codomain = space
        self.base = base
        self.parts = parts
        self.manifest = manifest or {}

    def apply(self, x: PointRef) -> PointRef:
        if contains_point(self.domain, self.base, x):
            return x
        for part in self.parts:
            if contains_point(self.domain, part.region, x):
                return part.apply(x)
        raise GeometryError("point outside every piece")

    def image(self, S: Subtree, _check_connected=True) -> Subtree:
        parts_out = []
        cap = intersect_subtrees(self.domain, S, self.base)
        if not cap.is_empty():
            parts_out.append(cap)
        for part in self.parts:
            C = intersect_subtrees(self.domain, S, part.region)
            if C.is_empty():
                continue
            off_base = _minus_base(self.domain, C, self.base)
            if off_base is None:
                continue
            if off_base.is_degenerate():
                parts_out.append(
                    point_subtree(self.domain, part.apply(off_base.single_point()))
                )
            else:
                parts_out.append(part.image(off_base))
        comps = union_subtrees(self.domain, parts_out)
        if _check_connected and len(comps) != 1:
            raise GeometryError("image of a connected set came out disconnected")
        return comps[0]

    def invariant_regions(self):
        return [part.region for part in self.parts]


def _minus_base(D, C, base):
    """C with its base-arc overlap trimmed to the attachment (approximate).

    Pieces overlap along the base where the map is the identity; the
    off-base remainder determines the nontrivial image.  When C lies inside
    the base entirely, None is returned (the identity part covers it).
    """
    ivs = {}
    verts = set()
    for e, (a, b) in C.intervals.items():
        if e in base.intervals:
            continue
        ivs[e] = (a, b)
    for v in C.vertices:
        keep = False
        for e in ivs:
            ed = D.edges[e]
            if v in (ed.u, ed.v):
                keep = True
        if keep:
            verts.add(v)
    if not ivs:
        return None
    return make_subtree(D, ivs, verts)
