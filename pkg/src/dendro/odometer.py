"""Skew product over the 3-adic adding machine, with exact fiber geometry.

The base space is the set of digit sequences over {0,1,2} with addition mod 3
carrying from position 0 upward.  Only addresses with finitely many digits
different from 1 are represented; these are exactly the addresses whose
vertical fiber is nondegenerate, and they form a single orbit of the +1 map.

An address alpha embeds horizontally at x = sum 2*alpha_i / 5^(i+1); its
fiber is the vertical segment of height 3^(-ell(alpha)) where ell counts the
non-1 digits.  The skew map sends (x_alpha, y) to (x_{alpha+1}, y rescaled
linearly onto the new fiber), a homeomorphism.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from fractions import Fraction
from dendro.metric_tree import PointRef
from dendro.serialize import format_rat
from dendro.tree_map import TreeMap


class AddressError(ValueError):
    pass


@dataclass(frozen=True)
class Address:
    """3-adic address with finitely many digits different from 1.

    ``digits`` maps position -> digit for the non-1 digits only (canonical).
    """

    digits: tuple = ()  # sorted tuple of (position, digit) with digit != 1

    def __post_init__(self):
        seen = set()
        for pos, d in self.digits:
            if d not in (0, 2):
                raise AddressError("stored digits must be 0 or 2")
            if pos < 0 or pos in seen:
                raise AddressError("bad digit positions")
            seen.add(pos)
        if tuple(sorted(self.digits)) != self.digits:
            raise AddressError("digits must be sorted by position")

    def digit(self, pos: int) -> int:
        for p, d in self.digits:
            if p == pos:
                return d
        return 1

    @staticmethod
    def ones() -> "Address":
        return Address(())

    @staticmethod
    def from_digit_map(m: dict) -> "Address":
        return Address(tuple(sorted((p, d) for p, d in m.items() if d != 1)))

    # -- literal syntax: little-endian digits then "1^inf"

    @staticmethod
    def parse(text: str) -> "Address":
        t = text.strip().replace("^INF", "^inf")
        if not t.endswith("^inf"):
            raise AddressError(f"address literal must end with '1^inf': {text!r}")
        body = t[: -len("^inf")]
        if not body.endswith("1"):
            raise AddressError(f"address literal must end with '1^inf': {text!r}")
        body = body[:-1]
        m = {}
        for i, ch in enumerate(body):
            if ch not in "012":
                raise AddressError(f"bad digit {ch!r} in {text!r}")
            if ch != "1":
                m[i] = int(ch)
        return Address.from_digit_map(m)

    def literal(self) -> str:
        if not self.digits:
            return "1^inf"
        top = max(p for p, _ in self.digits)
        body = "".join(str(self.digit(i)) for i in range(top + 1))
        return body + "1^inf"

    def __str__(self):
        return self.literal()


def ell(alpha: Address) -> int:
    """Count of digits different from 1 (drives the fiber height)."""
    return len(alpha.digits)


def add(alpha: Address, n: int) -> Address:
    """alpha + n under 3-adic addition with carry upward; n may be negative."""
    if n == 0:
        return alpha
    out = dict(alpha.digits)

    def get(pos):
        return out.get(pos, 1)

    def put(pos, d):
        if d == 1:
            out.pop(pos, None)
        else:
            out[pos] = d

    if n > 0:
        pos = 0
        carry = 0
        m = n
        while m > 0 or carry:
            add_digit = m % 3
            m //= 3
            s = get(pos) + add_digit + carry
            put(pos, s % 3)
            carry = s // 3
            pos += 1
        return Address.from_digit_map(out)
    # subtraction with borrow
    m = -n
    pos = 0
    borrow = 0
    while m > 0 or borrow:
        sub_digit = m % 3
        m //= 3
        s = get(pos) - sub_digit - borrow
        if s < 0:
            s += 3
            borrow = 1
        else:
            borrow = 0
        put(pos, s)
        pos += 1
    return Address.from_digit_map(out)


def embed_x(alpha: Address) -> Fraction:
    """Horizontal coordinate sum 2*digit_i / 5^(i+1), in closed form."""
    x = Fraction(1, 2)  # the all-ones tail
    for pos, d in alpha.digits:
        x += Fraction(2 * (d - 1), 5 ** (pos + 1))
    return x


def fiber_height(alpha: Address) -> Fraction:
    return Fraction(1, 3 ** ell(alpha))


@dataclass(frozen=True)
class FiberPoint:
    alpha: Address
    y: Fraction

    def __post_init__(self):
        if not (0 <= self.y <= fiber_height(self.alpha)):
            raise AddressError("vertical coordinate outside the fiber")

    @property
    def x(self) -> Fraction:
        return embed_x(self.alpha)


def step(p: FiberPoint) -> FiberPoint:
    """The skew map: shift the base by +1, rescale the fiber linearly."""
    nxt = add(p.alpha, 1)
    factor = Fraction(3 ** ell(p.alpha), 3 ** ell(nxt))
    return FiberPoint(nxt, p.y * factor)


def step_inverse(p: FiberPoint) -> FiberPoint:
    prev = add(p.alpha, -1)
    factor = Fraction(3 ** ell(p.alpha), 3 ** ell(prev))
    return FiberPoint(prev, p.y * factor)


def fiber_diam_traj(alpha: Address, N: int) -> list[Fraction]:
    """diam of the n-th image of the fiber over alpha, n = 0..N (exact)."""
    out = []
    cur = alpha
    for _ in range(N + 1):
        out.append(fiber_height(cur))
        cur = add(cur, 1)
    return out


def write_traj_csv(path, alpha: Address, N: int) -> int:
    """CSV rows (n, ell, diam); returns the number of data rows."""
    cur = alpha
    rows = 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "ell", "diam"])
        for n in range(N + 1):
            w.writerow([n, ell(cur), format_rat(fiber_height(cur))])
            rows += 1
            cur = add(cur, 1)
    return rows


# ---------------------------------------------------------------------------
# scrambled-set cardinality on one fiber


def pair_limsup_distance(alpha: Address, y1: Fraction, y2: Fraction) -> Fraction:
    """limsup of the orbit distance of two points on one fiber.

    Same-fiber points keep equal horizontal coordinates forever, and the
    vertical gap at time n is |y1-y2| * 3^(ell(alpha) - ell(alpha+n)); the
    least value of ell(alpha+n) over n >= 1 is 1, attained infinitely often,
    so the limsup is |y1-y2| * 3^(ell(alpha)-1).
    """
    return abs(y1 - y2) * Fraction(3 ** ell(alpha), 3)


@dataclass(frozen=True)
class EpsScrambledResult:
    size: int
    analytic_bound: int
    epsilon: Fraction
    grid: int


def eps_scrambled_max(alpha: Address, epsilon, grid: int = 1000) -> EpsScrambledResult:
    """Largest grid subset of the fiber that is pairwise epsilon-scrambled.

    Pairs must satisfy limsup distance > epsilon exactly; on the grid this is
    a gap threshold, so a left-to-right greedy sweep attains the maximum.
    The analytic ceiling floor(1/(3 epsilon)) + 1 is reported alongside.
    """
    epsilon = Fraction(epsilon)
    if epsilon <= 0:
        raise AddressError("epsilon must be positive")
    if grid < 10:
        raise AddressError("grid resolution must be at least 10")
    H = fiber_height(alpha)
    # pairwise condition: |y_i - y_j| * 3^(ell-1) > eps
    threshold = epsilon * Fraction(3, 3 ** ell(alpha))
    pts = [H * Fraction(i, grid) for i in range(grid + 1)]
    chosen = 0
    last = None
    for y in pts:
        if last is None or y - last > threshold:
            chosen += 1
            last = y
    bound = int(Fraction(1) / (3 * epsilon)) + 1
    return EpsScrambledResult(size=chosen, analytic_bound=bound,
                              epsilon=epsilon, grid=grid)


# ---------------------------------------------------------------------------
# the invariant Cantor restriction


def ternary_digits(y: Fraction):
    """(preperiod, period) digit lists of the ternary expansion of y in [0,1].

    Terminating rationals get the expansion with period (0,).
    """
    if not (0 <= y <= 1):
        raise AddressError("expansion defined on [0,1]")
    seen = {}
    digits = []
    rem = y
    while True:
        key = rem
        if key in seen:
            start = seen[key]
            return digits[:start], digits[start:]
        seen[key] = len(digits)
        rem *= 3
        d = min(int(rem), 2)  # rem == 3 only for y == 1, expanded as 0.222...
        digits.append(d)
        rem -= d


def in_cantor_set(y: Fraction) -> bool:
    """Exact membership of a rational in the middle-thirds Cantor set."""
    if not (0 <= y <= 1):
        return False
    pre, per = ternary_digits(y)
    if all(d != 1 for d in pre + per):
        return True
    # terminating expansions ending in 1 have a twin ending in 0222...
    if per == [0] and pre and pre[-1] == 1:
        twin = pre[:-1] + [0]
        return all(d != 1 for d in twin)
    return False


def in_cantor_restriction(p: FiberPoint) -> bool:
    """True iff the vertical coordinate lies in the invariant Cantor section.

    The fiber over alpha meets the Cantor set scaled into [0, 3^-ell]; the
    vertical coordinate rescaled by 3^ell must avoid ternary digit 1.
    """
    H = fiber_height(p.alpha)
    if not (0 <= p.y <= H):
        return False
    return in_cantor_set(p.y * 3 ** ell(p.alpha))


# ---------------------------------------------------------------------------
# rectangle pattern of the ambient planar set


@dataclass(frozen=True)
class Rect:
    word: str  # base-3 word, most significant first in construction order
    x0: Fraction
    x1: Fraction
    y0: Fraction
    y1: Fraction

    def child(self, i: int) -> "Rect":
        theta = Fraction(1) if i == 1 else Fraction(1, 3)
        w = self.x1 - self.x0
        h = self.y1 - self.y0
        return Rect(
            word=self.word + str(i),
            x0=self.x0 + Fraction(2 * i, 5) * w,
            x1=self.x0 + Fraction(2 * i + 1, 5) * w,
            y0=self.y0,
            y1=self.y0 + theta * h,
        )


def rect_pattern(depth: int) -> list[Rect]:
    """All rectangles of the depth-th construction stage (3^depth of them)."""
    if depth < 0:
        raise AddressError("depth must be nonnegative")
    level = [Rect("", Fraction(0), Fraction(1), Fraction(0), Fraction(1))]
    for _ in range(depth):
        level = [r.child(i) for r in level for i in range(3)]
    return level


def write_pattern_csv(path, depth: int) -> int:
    rects = rect_pattern(depth)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["word", "x0", "x1", "y0", "y1"])
        for r in rects:
            w.writerow(
                [r.word or "-", format_rat(r.x0), format_rat(r.x1),
                 format_rat(r.y0), format_rat(r.y1)]
            )
    return len(rects)


# ---------------------------------------------------------------------------
# endpoint-tree extension


def gehman_extend(depth: int):
    """Binary endpoint tree of the given depth with the cylinder-level map.

    The tree is the depth-m binary approximation of the all-order-3 dendrite;
    each leaf carries the length-m digit prefix of the address orbit of the
    all-ones point, and the map advances leaves cyclically along that orbit
    (the wrap at leaf 2^m - 1 is a truncation artifact).  Interior vertices
    map to their parents, so every interior vertex reaches the root fixed
    point within `depth` steps.  This is a cylinder-resolution model: leaf
    dynamics reproduce the base-odometer cylinder action, not the full
    endpoint homeomorphism.
    """
    from dendro.gallery import gehman_tree

    depth = int(depth)
    if depth < 2:
        raise AddressError("depth must be >= 2")
    D = gehman_tree(depth)
    leaves = [v for v in D.vertices if D.degree(v) == 1 and v != "g"]
    leaves.sort()
    n_leaves = len(leaves)
    labels = {}
    cur = Address.ones()
    for j, leaf in enumerate(leaves):
        prefix = "".join(str(cur.digit(i)) for i in range(depth))
        labels[leaf] = prefix
        cur = add(cur, 1)
    parent_of = {}
    for e in D.edges:
        parent_of[e.v] = e.u  # construction emits parent -> child edges
    leaf_index = {leaf: j for j, leaf in enumerate(leaves)}
    vertex_images = {"g": PointRef(vertex="g")}
    for v in D.vertices:
        if v == "g":
            continue
        if v in leaf_index:
            j = leaf_index[v]
            vertex_images[v] = PointRef(vertex=leaves[(j + 1) % n_leaves])
        else:
            vertex_images[v] = PointRef(vertex=parent_of[v])
    Fmap = TreeMap(D, D, vertex_images)
    D.descriptor = dict(D.descriptor or {})
    D.descriptor.update(
        {
            "family": "gehman",
            "params": {"depth": depth},
            "leaf_cylinders": {leaf: labels[leaf] for leaf in leaves},
        }
    )
    return D, Fmap
