"""Finite-horizon checks of the macroscopic chaos conditions over set families.

Semantics are one-sided by design: a proximality record of 0 certifies that
the two image sets met at some step (evidence for the liminf-0 condition),
while a positive record is merely inconclusive at the horizon.  Diameter
records grow with the horizon, so the uniform-sensitivity estimate
``eta_estimate`` is a lower bound for what any longer horizon would report.
Every quantity is an exact rational.
"""

from __future__ import annotations

import csv
import random
from dataclasses import dataclass
from fractions import Fraction
from dendro.metric_tree import (
    Dendrite,
    GeometryError,
    PointRef,
    Subtree,
    ball,
    dist,
    full_subtree,
    make_subtree,
    span_subtree,
    subtree_diam,
    subtree_dist,
)
from dendro.serialize import format_rat

INTERPRETATION_NOTE = (
    "records are finite-horizon evidence: prox_record 0 certifies the image "
    "sets met at some step; positive records are inconclusive. A generic "
    "eps-chaos certificate is supported only for eps < eta_estimate/2."
)


# ---------------------------------------------------------------------------
# set families


@dataclass(frozen=True)
class SetFamily:
    """Generator spec for a family of nondegenerate test sets.

    kinds: ``balls`` (centers at vertices and edge midpoints, radii on a
    geometric grid), ``free_arcs`` (interior edge segments), ``subdendrites``
    (interior edge segments plus seeded random spans), ``explicit``.
    """

    kind: str
    radii_levels: int = 5
    sample_count: int = 8
    seed: int = 0
    members: tuple = ()

    def generate(self, D: Dendrite) -> list[Subtree]:
        if self.kind == "balls":
            out = self._balls(D)
        elif self.kind == "free_arcs":
            out = self._free_arcs(D)
        elif self.kind == "subdendrites":
            out = self._subdendrites(D)
        elif self.kind == "explicit":
            out = list(self.members)
        else:
            raise GeometryError(f"unknown family kind {self.kind!r}")
        out = [S for S in out if not S.is_degenerate()]
        if not out:
            raise GeometryError("family generated no nondegenerate members")
        return out

    def _centers(self, D: Dendrite):
        pts = [PointRef(vertex=v) for v in D.vertices]
        for e in range(len(D.edges)):
            pts.append(D.point(e, D.edge_length(e) / 2))
        return pts

    def _balls(self, D: Dendrite):
        diam = subtree_diam(D, full_subtree(D))
        out = []
        seen = set()
        for c in self._centers(D):
            for j in range(self.radii_levels):
                r = diam / 2 * Fraction(1, 2**j)
                B = ball(D, c, r)
                key = (tuple(sorted(B.vertices)), tuple(sorted(B.intervals.items())))
                if key not in seen:
                    seen.add(key)
                    out.append(B)
        return out

    def _free_arcs(self, D: Dendrite):
        out = []
        for e in range(len(D.edges)):
            L = D.edge_length(e)
            out.append(make_subtree(D, {e: (L / 4, 3 * L / 4)}))
        return out

    def _subdendrites(self, D: Dendrite):
        out = []
        for e in range(len(D.edges)):
            L = D.edge_length(e)
            out.append(make_subtree(D, {e: (L / 3, 2 * L / 3)}))
        rng = random.Random(self.seed)
        for _ in range(self.sample_count):
            pts = [_random_point(rng, D) for _ in range(rng.randint(2, 4))]
            S = span_subtree(D, pts)
            if not S.is_degenerate():
                out.append(S)
        return out


def _random_point(rng: random.Random, D: Dendrite, den: int = 4096) -> PointRef:
    e = rng.randrange(len(D.edges))
    return D.point(e, D.edge_length(e) * Fraction(rng.randint(0, den), den))


# ---------------------------------------------------------------------------
# records


def prox_record(F, S1: Subtree, S2: Subtree, N: int) -> Fraction:
    """min over 0 <= n <= N of the exact distance between the image sets."""
    if S1.is_degenerate() or S2.is_degenerate():
        raise GeometryError("prox_record needs nondegenerate sets")
    best = None
    A, B = S1, S2
    for n in range(N + 1):
        d = subtree_dist(F.codomain if n else F.domain, A, B)
        if best is None or d < best:
            best = d
        if best == 0:
            return Fraction(0)
        A, B = F.image(A), F.image(B)
    return best


def sens_record(F, S: Subtree, N0: int, N: int) -> Fraction:
    """max over N0 <= n <= N of diam f^n(S)."""
    if not (0 <= N0 <= N):
        raise GeometryError("need 0 <= N0 <= N")
    best = Fraction(0)
    A = S
    for n in range(N + 1):
        if n >= N0:
            d = subtree_diam(F.domain if n == 0 else F.codomain, A)
            if d > best:
                best = d
        if n < N:
            A = F.image(A)
    return best


@dataclass
class LySampleReport:
    pair_count: int
    horizon: int
    delta: Fraction
    epsilon: Fraction
    seed: int
    scrambling_evidence: int
    proximal_only: int
    separated_only: int
    neither: int

    def to_dict(self):
        return {
            "pair_count": self.pair_count,
            "horizon": self.horizon,
            "delta": format_rat(self.delta),
            "epsilon": format_rat(self.epsilon),
            "seed": self.seed,
            "scrambling_evidence": self.scrambling_evidence,
            "proximal_only": self.proximal_only,
            "separated_only": self.separated_only,
            "neither": self.neither,
            "note": "one-sided finite-horizon evidence, not a decision of the "
            "asymptotic property",
        }


def ly_sample(F, pair_count: int, N: int, delta, epsilon, seed: int) -> LySampleReport:
    """Sampled point pairs classified by finite-horizon min/max orbit distance.

    A pair counts as scrambling evidence iff its distance dips to <= delta
    and also exceeds epsilon somewhere within the horizon.
    """
    delta, epsilon = Fraction(delta), Fraction(epsilon)
    if delta <= 0 or epsilon <= 0:
        raise GeometryError("delta and epsilon must be positive")
    rng = random.Random(seed)
    D = F.domain
    both = prox_only = sep_only = neither = 0
    for _ in range(pair_count):
        x, y = _random_point(rng, D), _random_point(rng, D)
        lo = hi = dist(D, x, y)
        for _n in range(N):
            x, y = F.apply(x), F.apply(y)
            d = dist(F.codomain, x, y)
            lo = min(lo, d)
            hi = max(hi, d)
        prox = lo <= delta
        sep = hi > epsilon
        if prox and sep:
            both += 1
        elif prox:
            prox_only += 1
        elif sep:
            sep_only += 1
        else:
            neither += 1
    return LySampleReport(
        pair_count=pair_count,
        horizon=N,
        delta=delta,
        epsilon=epsilon,
        seed=seed,
        scrambling_evidence=both,
        proximal_only=prox_only,
        separated_only=sep_only,
        neither=neither,
    )


# ---------------------------------------------------------------------------
# verdict


@dataclass
class ChaosReport:
    horizon: int
    sens_start: int
    tolerance: Fraction
    family_kind: str
    member_count: int
    prox_records: list  # [((i, j), Fraction)]
    sens_records: list  # [(i, Fraction)]
    eta_estimate: Fraction
    prox_pass: bool
    sens0_pass: bool
    generic_chaos_evidence: bool
    note: str = INTERPRETATION_NOTE

    def to_dict(self):
        return {
            "horizon": self.horizon,
            "sens_start": self.sens_start,
            "tolerance": format_rat(self.tolerance),
            "family": {"kind": self.family_kind, "members": self.member_count},
            "prox_records": [
                {"pair": list(ij), "record": format_rat(r)}
                for ij, r in self.prox_records
            ],
            "sens_records": [
                {"member": i, "record": format_rat(r)} for i, r in self.sens_records
            ],
            "eta_estimate": format_rat(self.eta_estimate),
            "prox_pass": self.prox_pass,
            "sens0_pass": self.sens0_pass,
            "generic_chaos_evidence": self.generic_chaos_evidence,
            "note": self.note,
        }


def verdict(
    F,
    family: SetFamily,
    N: int = 100,
    N0: int = 1,
    tolerance=Fraction(0),
) -> ChaosReport:
    """Evaluate prox over all family pairs and sens over all members.

    The sensitivity window starts at N0 = 1 by default so a set's initial
    diameter does not stand in for sustained sensitivity (a constant map
    must fail, the identity must pass).
    """
    members = family.generate(F.domain)
    tolerance = Fraction(tolerance)
    prox_records = []
    for i in range(len(members)):
        for j in range(i + 1, len(members)):
            r = prox_record(F, members[i], members[j], N)
            prox_records.append(((i, j), r))
    sens_records = []
    for i, S in enumerate(members):
        sens_records.append((i, sens_record(F, S, N0, N)))
    eta = min(r for _, r in sens_records)
    prox_pass = all(r <= tolerance for _, r in prox_records)
    sens0_pass = all(r > 0 for _, r in sens_records)
    return ChaosReport(
        horizon=N,
        sens_start=N0,
        tolerance=tolerance,
        family_kind=family.kind,
        member_count=len(members),
        prox_records=prox_records,
        sens_records=sens_records,
        eta_estimate=eta,
        prox_pass=prox_pass,
        sens0_pass=sens0_pass,
        generic_chaos_evidence=prox_pass and sens0_pass,
    )


def default_delta() -> Fraction:
    return Fraction(1, 1000)


def default_epsilon(D: Dendrite) -> Fraction:
    return subtree_diam(D, full_subtree(D)) / 2


def trajectory_rows(F, S1: Subtree, S2: Subtree, N: int):
    """(n, diam f^n(S1), dist(f^n(S1), f^n(S2))) rows for CSV export."""
    rows = []
    A, B = S1, S2
    for n in range(N + 1):
        space = F.domain if n == 0 else F.codomain
        rows.append((n, subtree_diam(space, A), subtree_dist(space, A, B)))
        if n < N:
            A, B = F.image(A), F.image(B)
    return rows


def write_trajectory_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "diam", "distance"])
        for n, d, r in rows:
            w.writerow([n, format_rat(d), format_rat(r)])
