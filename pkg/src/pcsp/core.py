"""Boolean folded promise CSP data model, evaluation, and brute-force oracles.

Predicates are finite relations over {-1,+1}^k stored as bitsets: bit index
``c`` encodes the tuple whose i-th coordinate is +1 exactly when bit i of
``c`` is set.  All values here are immutable; every operation is a pure
function, so shared data is safe to use concurrently.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass
from fractions import Fraction
from math import comb
from typing import Iterable, Sequence

MAX_ARITY = 16
DEFAULT_BRUTE_CAP = 24


class PcspError(Exception):
    """Base class for errors raised by this package."""


class ValidationError(PcspError):
    pass


class ParseError(PcspError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class BruteForceCapError(PcspError):
    pass


def _check_tuple(t: Sequence[int], k: int) -> None:
    if len(t) != k:
        raise ValidationError(f"tuple {t} has length {len(t)}, expected {k}")
    for v in t:
        if v not in (-1, 1):
            raise ValidationError(f"tuple entry {v!r} is not in {{-1,+1}}")


def code_of_tuple(t: Sequence[int]) -> int:
    """Bitset index of a +-1 tuple (+1 maps to a set bit)."""
    c = 0
    for i, v in enumerate(t):
        if v == 1:
            c |= 1 << i
    return c


def tuple_of_code(c: int, k: int) -> tuple[int, ...]:
    return tuple(1 if (c >> i) & 1 else -1 for i in range(k))


@dataclass(frozen=True)
class Predicate:
    """A relation over {-1,+1}^arity, stored as a bitset over 2^arity."""

    arity: int
    bits: int

    def __post_init__(self):
        if not 1 <= self.arity <= MAX_ARITY:
            raise ValidationError(f"arity {self.arity} out of range [1, {MAX_ARITY}]")
        if not 0 <= self.bits < (1 << (1 << self.arity)):
            raise ValidationError("bitset out of range for arity")

    @staticmethod
    def from_tuples(arity: int, tuples: Iterable[Sequence[int]]) -> "Predicate":
        bits = 0
        for t in tuples:
            _check_tuple(t, arity)
            bits |= 1 << code_of_tuple(t)
        return Predicate(arity, bits)

    @staticmethod
    def empty(arity: int) -> "Predicate":
        return Predicate(arity, 0)

    @staticmethod
    def full(arity: int) -> "Predicate":
        return Predicate(arity, (1 << (1 << arity)) - 1)

    def __contains__(self, t: Sequence[int]) -> bool:
        _check_tuple(t, self.arity)
        return bool((self.bits >> code_of_tuple(t)) & 1)

    def contains_code(self, c: int) -> bool:
        return bool((self.bits >> c) & 1)

    def __len__(self) -> int:
        return self.bits.bit_count()

    @property
    def is_empty(self) -> bool:
        return self.bits == 0

    @property
    def is_full(self) -> bool:
        return self.bits == (1 << (1 << self.arity)) - 1

    def tuples(self) -> tuple[tuple[int, ...], ...]:
        """Member tuples in increasing bitset-code order."""
        k = self.arity
        return tuple(tuple_of_code(c, k) for c in range(1 << k) if (self.bits >> c) & 1)

    def excluded_tuples(self) -> tuple[tuple[int, ...], ...]:
        k = self.arity
        return tuple(tuple_of_code(c, k) for c in range(1 << k) if not (self.bits >> c) & 1)

    def issubset(self, other: "Predicate") -> bool:
        return self.arity == other.arity and (self.bits & ~other.bits) == 0

    def weight_set(self) -> frozenset[int]:
        """Hamming weights (number of +1 entries) present in the relation."""
        return frozenset(sum(1 for v in t if v == 1) for t in self.tuples())

    @property
    def is_symmetric(self) -> bool:
        by_weight: dict[int, int] = {}
        for c in range(1 << self.arity):
            w = c.bit_count()
            by_weight[w] = by_weight.get(w, 0)
        for c in range(1 << self.arity):
            if (self.bits >> c) & 1:
                by_weight[c.bit_count()] += 1
        return all(cnt in (0, comb(self.arity, w)) for w, cnt in by_weight.items())

    def odot(self, x: Sequence[int]) -> "Predicate":
        """Entrywise product {a * x : a in P}."""
        _check_tuple(x, self.arity)
        mask = code_of_tuple(x)
        bits = 0
        for c in range(1 << self.arity):
            if (self.bits >> c) & 1:
                # multiplying coordinate i by -1 flips bit i; x_i = -1 <=> mask bit clear
                bits |= 1 << (c ^ (((1 << self.arity) - 1) & ~mask))
        return Predicate(self.arity, bits)

    def negate_all(self) -> "Predicate":
        return self.odot((-1,) * self.arity)

    def fixed_coordinates(self) -> dict[int, int]:
        """Coordinates (0-based) taking the same value in every member tuple."""
        if self.is_empty:
            raise ValidationError("fixed coordinates undefined for an empty relation")
        ts = self.tuples()
        fixed = {}
        for i in range(self.arity):
            vals = {t[i] for t in ts}
            if len(vals) == 1:
                fixed[i] = next(iter(vals))
        return fixed

    def project_out(self, coords: Sequence[int]) -> "Predicate":
        """Delete the given coordinates; the remaining ones keep their order."""
        drop = set(coords)
        keep = [i for i in range(self.arity) if i not in drop]
        if not keep:
            raise ValidationError("cannot project out every coordinate")
        return Predicate.from_tuples(len(keep), {tuple(t[i] for i in keep) for t in self.tuples()})


def make_ham(k: int, weights: Iterable[int]) -> Predicate:
    """All tuples in {-1,+1}^k whose count of +1 entries lies in ``weights``."""
    if not 1 <= k <= MAX_ARITY:
        raise ValidationError(f"arity {k} out of range [1, {MAX_ARITY}]")
    ws = set(weights)
    if not ws <= set(range(k + 1)):
        raise ValidationError(f"weights {sorted(ws)} outside [0, {k}]")
    bits = 0
    for c in range(1 << k):
        if c.bit_count() in ws:
            bits |= 1 << c
    return Predicate(k, bits)


def nae(k: int) -> Predicate:
    return make_ham(k, range(1, k))


def ksat(k: int) -> Predicate:
    return make_ham(k, range(1, k + 1))


def three_lin() -> Predicate:
    """Parity relation x1*x2*x3 = +1, i.e. Hamming weights {1, 3}."""
    return make_ham(3, {1, 3})


@dataclass(frozen=True)
class PredicatePair:
    strong: Predicate
    weak: Predicate

    def __post_init__(self):
        if self.strong.arity != self.weak.arity:
            raise ValidationError("strong/weak arities differ")
        if not self.strong.issubset(self.weak):
            raise ValidationError("strong relation is not contained in the weak one")

    @property
    def arity(self) -> int:
        return self.strong.arity

    @property
    def is_symmetric(self) -> bool:
        return self.strong.is_symmetric and self.weak.is_symmetric


@dataclass(frozen=True)
class Template:
    pairs: tuple[PredicatePair, ...]
    idempotent: bool = False

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple(self.pairs))
        if not self.pairs:
            raise ValidationError("template has no predicate pairs")
        for p in self.pairs:
            if p.strong.is_empty:
                raise ValidationError("template contains an empty strong relation")

    @property
    def is_symmetric(self) -> bool:
        return all(p.is_symmetric for p in self.pairs)

    @property
    def max_arity(self) -> int:
        return max(p.arity for p in self.pairs)


@dataclass(frozen=True)
class Literal:
    """A signed variable reference (1-based) or a +-1 constant (var is None)."""

    var: int | None
    sign: int

    def __post_init__(self):
        if self.sign not in (-1, 1):
            raise ValidationError("literal sign must be -1 or +1")
        if self.var is not None and self.var < 1:
            raise ValidationError("variable index must be >= 1")

    @staticmethod
    def pos(i: int) -> "Literal":
        return Literal(i, 1)

    @staticmethod
    def neg(i: int) -> "Literal":
        return Literal(i, -1)

    @staticmethod
    def const(value: int) -> "Literal":
        return Literal(None, value)

    @property
    def is_const(self) -> bool:
        return self.var is None

    def negated(self) -> "Literal":
        return Literal(self.var, -self.sign)

    def __str__(self) -> str:
        if self.is_const:
            return "T" if self.sign == 1 else "F"
        return f"{'+' if self.sign == 1 else '-'}{self.var}"


@dataclass(frozen=True)
class Constraint:
    pair_index: int
    literals: tuple[Literal, ...]

    def __post_init__(self):
        object.__setattr__(self, "literals", tuple(self.literals))


@dataclass(frozen=True)
class Instance:
    num_vars: int
    template: Template
    constraints: tuple[Constraint, ...]

    def __post_init__(self):
        object.__setattr__(self, "constraints", tuple(self.constraints))
        if self.num_vars < 0:
            raise ValidationError("num_vars must be >= 0")
        for j, c in enumerate(self.constraints):
            if not 0 <= c.pair_index < len(self.template.pairs):
                raise ValidationError(f"constraint {j}: pair index {c.pair_index} out of range")
            pair = self.template.pairs[c.pair_index]
            if len(c.literals) != pair.arity:
                raise ValidationError(
                    f"constraint {j}: {len(c.literals)} literals for arity-{pair.arity} pair"
                )
            for lit in c.literals:
                if lit.is_const:
                    if not self.template.idempotent:
                        raise ValidationError(
                            f"constraint {j}: constants need an idempotent template"
                        )
                elif not 1 <= lit.var <= self.num_vars:
                    raise ValidationError(f"constraint {j}: variable {lit.var} out of range")

    @property
    def num_constraints(self) -> int:
        return len(self.constraints)


@dataclass(frozen=True)
class Assignment:
    values: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))
        for v in self.values:
            if v not in (-1, 1):
                raise ValidationError("assignment entries must be -1 or +1")

    def __len__(self) -> int:
        return len(self.values)

    def value(self, var: int) -> int:
        return self.values[var - 1]

    def negated(self) -> "Assignment":
        return Assignment(tuple(-v for v in self.values))


def eval_literal_tuple(constraint: Constraint, assignment: Assignment) -> tuple[int, ...]:
    """Entrywise literal evaluation: sign * value for variables, constants pass through."""
    out = []
    for lit in constraint.literals:
        if lit.is_const:
            out.append(lit.sign)
        else:
            out.append(lit.sign * assignment.value(lit.var))
    return tuple(out)


def constraint_satisfied(inst: Instance, j: int, assignment: Assignment, mode: str) -> bool:
    c = inst.constraints[j]
    pair = inst.template.pairs[c.pair_index]
    pred = pair.strong if mode == "strong" else pair.weak
    return eval_literal_tuple(c, assignment) in pred


def satisfied_fraction(inst: Instance, assignment: Assignment, mode: str) -> Fraction:
    """Exact fraction of constraints whose evaluated tuple lies in P (strong) or Q (weak)."""
    if mode not in ("strong", "weak"):
        raise ValidationError(f"mode must be 'strong' or 'weak', got {mode!r}")
    if len(assignment) != inst.num_vars:
        raise ValidationError("assignment length does not match num_vars")
    m = inst.num_constraints
    if m == 0:
        return Fraction(1)
    hits = sum(1 for j in range(m) if constraint_satisfied(inst, j, assignment, mode))
    return Fraction(hits, m)


# ---------------------------------------------------------------------------
# Brute-force oracle.
#
# Assignments are encoded as integers x in [0, 2^n): variable i (1-based)
# is +1 exactly when bit (n - i) of x is set.  With that convention the
# integer order on codes equals the lexicographic order on value tuples
# (with -1 < +1), so the first maximiser in increasing code order is the
# lexicographically smallest one.

try:  # compiled kernel, built by setup.py
    from . import _kernel as _search_impl

    KERNEL = "compiled"
except ImportError:  # pragma: no cover - depends on build environment
    from . import _kernel_py as _search_impl

    KERNEL = "python"


def _kernel_inputs(inst: Instance, mode: str):
    """Flatten per-constraint lookup tables for the search kernels.

    Each constraint gets a table over the value patterns of its distinct
    variables; constants and literal signs are folded into the table.
    """
    import numpy as np

    n = inst.num_vars
    var_pos: list[int] = []
    var_off = [0]
    tables: list[int] = []
    table_off = [0]
    for c in inst.constraints:
        pair = inst.template.pairs[c.pair_index]
        pred = pair.strong if mode == "strong" else pair.weak
        uvars: list[int] = []
        slot_map: list[tuple[int, int] | int] = []  # (uvar slot, sign) or constant value
        for lit in c.literals:
            if lit.is_const:
                slot_map.append(lit.sign)
            else:
                if lit.var not in uvars:
                    uvars.append(lit.var)
                slot_map.append((uvars.index(lit.var), lit.sign))
        u = len(uvars)
        for pattern in range(1 << u):
            vals = [1 if (pattern >> q) & 1 else -1 for q in range(u)]
            t = tuple(s if isinstance(s, int) else s[1] * vals[s[0]] for s in slot_map)
            tables.append(1 if t in pred else 0)
        table_off.append(len(tables))
        var_pos.extend(n - v for v in uvars)  # bit position of each distinct variable
        var_off.append(len(var_pos))
    return (
        np.asarray(var_pos, dtype=np.int32),
        np.asarray(var_off, dtype=np.int64),
        np.asarray(tables, dtype=np.uint8),
        np.asarray(table_off, dtype=np.int64),
    )


def brute_force_best(
    inst: Instance, mode: str, cap: int | None = None
) -> tuple[Assignment, Fraction]:
    """Exhaustive maximum of satisfied_fraction over all 2^n assignments.

    Ties break toward the lexicographically smallest assignment.  The cap
    (default 24, overridable via PCSP_BRUTE_CAP) guards against runaway
    enumeration.
    """
    if mode not in ("strong", "weak"):
        raise ValidationError(f"mode must be 'strong' or 'weak', got {mode!r}")
    if cap is None:
        cap = int(os.environ.get("PCSP_BRUTE_CAP", DEFAULT_BRUTE_CAP))
    n = inst.num_vars
    if n > cap:
        raise BruteForceCapError(f"{n} variables exceed the brute-force cap {cap}")
    m = inst.num_constraints
    if m == 0:
        return Assignment((-1,) * n), Fraction(1)
    var_pos, var_off, tables, table_off = _kernel_inputs(inst, mode)
    best_count, best_code = _search_impl.search_best(
        1 << n, m, var_pos, var_off, tables, table_off
    )
    values = tuple(1 if (best_code >> (n - i)) & 1 else -1 for i in range(1, n + 1))
    return Assignment(values), Fraction(int(best_count), m)


# ---------------------------------------------------------------------------
# Instance document format (ASCII, 1-based indices):
#
#   pcsp v1
#   vars <n>
#   idempotent                          (optional flag)
#   pair <pred> <pred>                  (strong then weak)
#   use <pair-index> : <lit> <lit> ...
#
# where <pred> is "ham <k> {w1,w2,...}" or "tuples <k> {+-+,-++,...}" and
# literals are "+i", "-i", "T", "F".

_PRED_RE = re.compile(r"\s*(ham|tuples)\s+(\d+)\s*\{([^}]*)\}\s*")


def _parse_pred(text: str, line: int) -> tuple[Predicate, str]:
    m = _PRED_RE.match(text)
    if not m:
        raise ParseError(f"malformed predicate near {text!r}", line)
    kind, k_str, body = m.groups()
    k = int(k_str)
    items = [s.strip() for s in body.split(",") if s.strip()]
    try:
        if kind == "ham":
            pred = make_ham(k, (int(s) for s in items))
        else:
            tuples = []
            for s in items:
                if len(s) != k or any(ch not in "+-" for ch in s):
                    raise ValidationError(f"bad tuple string {s!r} for arity {k}")
                tuples.append(tuple(1 if ch == "+" else -1 for ch in s))
            pred = Predicate.from_tuples(k, tuples)
    except ValidationError as e:
        raise ParseError(str(e), line) from e
    return pred, text[m.end():]


def _parse_literal(tok: str, line: int) -> Literal:
    if tok == "T":
        return Literal.const(1)
    if tok == "F":
        return Literal.const(-1)
    if len(tok) >= 2 and tok[0] in "+-" and tok[1:].isdigit():
        return Literal(int(tok[1:]), 1 if tok[0] == "+" else -1)
    raise ParseError(f"bad literal {tok!r}", line)


def parse_instance(text: str) -> Instance:
    num_vars: int | None = None
    idempotent = False
    pairs: list[PredicatePair] = []
    raw_constraints: list[tuple[int, list[Literal], int]] = []
    saw_header = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if not saw_header:
            if line != "pcsp v1":
                raise ParseError(f"expected header 'pcsp v1', got {line!r}", lineno)
            saw_header = True
            continue
        if line.startswith("vars"):
            parts = line.split()
            if len(parts) != 2 or not parts[1].isdigit():
                raise ParseError("expected 'vars <n>'", lineno)
            num_vars = int(parts[1])
        elif line == "idempotent":
            idempotent = True
        elif line.startswith("pair"):
            rest = line[len("pair"):]
            strong, rest = _parse_pred(rest, lineno)
            weak, rest = _parse_pred(rest, lineno)
            if rest.strip():
                raise ParseError(f"trailing junk after pair: {rest!r}", lineno)
            try:
                pairs.append(PredicatePair(strong, weak))
            except ValidationError as e:
                raise ParseError(str(e), lineno) from e
        elif line.startswith("use"):
            body = line[len("use"):]
            if ":" not in body:
                raise ParseError("expected 'use <pair-index> : <literals>'", lineno)
            idx_str, lits_str = body.split(":", 1)
            idx_str = idx_str.strip()
            if not idx_str.isdigit():
                raise ParseError(f"bad pair index {idx_str!r}", lineno)
            lits = [_parse_literal(tok, lineno) for tok in lits_str.split()]
            raw_constraints.append((int(idx_str), lits, lineno))
        else:
            raise ParseError(f"unrecognised directive {line!r}", lineno)
    if not saw_header:
        raise ParseError("empty document, expected 'pcsp v1' header")
    if num_vars is None:
        raise ParseError("missing 'vars <n>' line")
    if not pairs:
        raise ParseError("document declares no predicate pairs")
    constraints = []
    for idx, lits, lineno in raw_constraints:
        if not 1 <= idx <= len(pairs):
            raise ParseError(f"pair index {idx} out of range 1..{len(pairs)}", lineno)
        constraints.append(Constraint(idx - 1, tuple(lits)))
    try:
        return Instance(num_vars, Template(tuple(pairs), idempotent), tuple(constraints))
    except ValidationError as e:
        raise ParseError(str(e)) from e


def _format_pred(p: Predicate) -> str:
    if p.is_symmetric:
        ws = ",".join(str(w) for w in sorted(p.weight_set()))
        return f"ham {p.arity} {{{ws}}}"
    ts = ",".join("".join("+" if v == 1 else "-" for v in t) for t in p.tuples())
    return f"tuples {p.arity} {{{ts}}}"


def serialize_instance(inst: Instance) -> str:
    lines = ["pcsp v1", f"vars {inst.num_vars}"]
    if inst.template.idempotent:
        lines.append("idempotent")
    for pair in inst.template.pairs:
        lines.append(f"pair {_format_pred(pair.strong)} {_format_pred(pair.weak)}")
    for c in inst.constraints:
        lits = " ".join(str(lit) for lit in c.literals)
        lines.append(f"use {c.pair_index + 1} : {lits}")
    return "\n".join(lines) + "\n"
