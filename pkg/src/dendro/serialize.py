"""Rational and JSON helpers shared by the descriptor file formats.

Rationals travel as ``"p/q"`` strings (plain ``"p"`` for integers) so files
round-trip exactly.
"""

from __future__ import annotations

import json
from fractions import Fraction


def format_rat(x: Fraction) -> str:
    x = Fraction(x)
    if x.denominator == 1:
        return str(x.numerator)
    return f"{x.numerator}/{x.denominator}"


def parse_rat(s) -> Fraction:
    if isinstance(s, Fraction):
        return s
    if isinstance(s, int):
        return Fraction(s)
    if isinstance(s, float):
        raise ValueError(f"refusing float rational {s!r}; use 'p/q' strings")
    text = str(s).strip()
    if "/" in text:
        num, den = text.split("/", 1)
        return Fraction(int(num), int(den))
    return Fraction(int(text))


def dump_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True, indent=1)
        fh.write("\n")


def dumps_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1) + "\n"


def load_json(path):
    with open(path) as fh:
        return json.load(fh)
