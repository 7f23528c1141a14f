"""Polymorphism checks and the structural LP machinery behind them.

Threshold families (majority, alternating threshold, OR, parity) are
checked against predicate pairs by enumerating multisets of strong tuples;
the output of each family depends only on tuple multiplicities, which
collapses the |P|^L ordered search to a polynomial one.  The separating
weight / majority witness dichotomy and the alternating-threshold closure
are computed with exact rational LPs so certificates can be converted to
integer-multiplicity witnesses.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, combinations_with_replacement
from math import comb, lcm
from typing import Iterable, Sequence

import numpy as np

from .core import PcspError, Predicate, PredicatePair, ValidationError, code_of_tuple
from .lp import INFEASIBLE, OPTIMAL, GeneralLp

DEFAULT_ENUM_BUDGET = 2_000_000

MAJ, AT, OR, PARITY = "maj", "at", "or", "parity"
_KINDS = (MAJ, AT, OR, PARITY)


class EnumerationBudgetError(PcspError):
    pass


class FixedCoordinateError(PcspError):
    pass


class CoverError(PcspError):
    pass


class PolymorphismError(PcspError):
    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


@dataclass(frozen=True)
class ThresholdFamily:
    kind: str
    arity: int

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValidationError(f"unknown family kind {self.kind!r}")
        if self.arity < 1:
            raise ValidationError("family arity must be >= 1")
        if self.kind in (MAJ, AT, PARITY) and self.arity % 2 == 0:
            raise ValidationError(f"{self.kind} needs an odd arity, got {self.arity}")


def apply_threshold(fam: ThresholdFamily, rows: Sequence[Sequence[int]]) -> tuple[int, ...]:
    """Coordinatewise family output on L rows of equal arity."""
    if len(rows) != fam.arity:
        raise ValidationError(f"expected {fam.arity} rows, got {len(rows)}")
    k = len(rows[0])
    for r in rows:
        if len(r) != k:
            raise ValidationError("rows have mismatched arities")
    out = []
    for i in range(k):
        col = [r[i] for r in rows]
        if fam.kind == MAJ:
            out.append(1 if sum(col) > 0 else -1)
        elif fam.kind == AT:
            s = sum(v if j % 2 == 0 else -v for j, v in enumerate(col))
            out.append(1 if s > 0 else -1)
        elif fam.kind == OR:
            out.append(max(col))
        else:  # parity
            prod = 1
            for v in col:
                prod *= v
            out.append(prod)
    return tuple(out)


@dataclass
class PolymorphismCheck:
    ok: bool
    family: ThresholdFamily
    witness: tuple[tuple[int, ...], ...] | None = None  # rows whose image leaves Q
    image: tuple[int, ...] | None = None


def _weak_membership_mask(Q: Predicate) -> np.ndarray:
    k = Q.arity
    return np.array([Q.contains_code(c) for c in range(1 << k)], dtype=bool)


def _sign_codes(sums: np.ndarray) -> np.ndarray:
    """Map each row of coordinate sums to the bitset code of its sign pattern."""
    k = sums.shape[1]
    return ((sums > 0).astype(np.int64) << np.arange(k, dtype=np.int64)).sum(axis=1)


def is_threshold_polymorphism(
    pair: PredicatePair, fam: ThresholdFamily, budget: int = DEFAULT_ENUM_BUDGET
) -> PolymorphismCheck:
    """Check whether every coordinatewise family application lands in the weak relation.

    Enumeration is over multisets (ordered multiset pairs for AT) in
    lexicographic order of strong-tuple codes, so the returned witness is
    deterministic.
    """
    P, Q = pair.strong, pair.weak
    if P.is_empty:
        raise ValidationError("strong relation is empty")
    tuples = P.tuples()
    arr = np.array(tuples, dtype=np.int64)
    L = fam.arity
    qmask = _weak_membership_mask(Q)

    if fam.kind in (MAJ, OR, PARITY):
        if fam.kind == MAJ:
            count = comb(len(tuples) + L - 1, L)
            if count > budget:
                raise EnumerationBudgetError(
                    f"{count} multisets exceed the enumeration budget {budget}"
                )
            idx = np.fromiter(
                (i for c in combinations_with_replacement(range(len(tuples)), L) for i in c),
                dtype=np.int64,
                count=count * L,
            ).reshape(count, L)
            codes = _sign_codes(arr[idx].sum(axis=1))
            bad = np.flatnonzero(~qmask[codes])
            if bad.size == 0:
                return PolymorphismCheck(True, fam)
            first = int(bad[0])
            rows = tuple(tuples[i] for i in idx[first])
            return PolymorphismCheck(False, fam, rows, apply_threshold(fam, rows))
        # OR / PARITY: outputs depend on the support set (and its parity for parity)
        sizes = range(1, min(L, len(tuples)) + 1) if fam.kind == OR else range(
            1, min(L, len(tuples)) + 1, 2
        )
        for s in sizes:
            for sub in combinations(range(len(tuples)), s):
                rows = [tuples[i] for i in sub]
                pad = list(rows)
                while len(pad) < L:  # padding keeps OR and parity outputs unchanged
                    pad.extend((rows[0], rows[0]) if fam.kind == PARITY else (rows[0],))
                pad = pad[:L]
                img = apply_threshold(fam, pad)
                if img not in Q:
                    return PolymorphismCheck(False, fam, tuple(pad), img)
        return PolymorphismCheck(True, fam)

    # AT: ordered pairs (odd-position multiset, even-position multiset)
    no, ne = (L + 1) // 2, (L - 1) // 2
    ca, cb = comb(len(tuples) + no - 1, no), comb(len(tuples) + ne - 1, ne)
    if ca * cb > budget:
        raise EnumerationBudgetError(
            f"{ca * cb} multiset pairs exceed the enumeration budget {budget}"
        )
    odd_idx = list(combinations_with_replacement(range(len(tuples)), no))
    even_idx = list(combinations_with_replacement(range(len(tuples)), ne))  # [()] when ne == 0
    odd_sums = np.array([arr[list(c)].sum(axis=0) for c in odd_idx], dtype=np.int64).reshape(
        len(odd_idx), P.arity
    )
    even_sums = np.array([arr[list(c)].sum(axis=0) for c in even_idx], dtype=np.int64).reshape(
        len(even_idx), P.arity
    )
    for a, osum in enumerate(odd_sums):
        codes = _sign_codes(osum[None, :] - even_sums)
        bad = np.flatnonzero(~qmask[codes])
        if bad.size:
            b = int(bad[0])
            odds = [tuples[i] for i in odd_idx[a]]
            evens = [tuples[i] for i in even_idx[b]]
            rows = []
            for j in range(L):
                rows.append(odds[j // 2] if j % 2 == 0 else evens[j // 2])
            rows = tuple(rows)
            return PolymorphismCheck(False, fam, rows, apply_threshold(fam, rows))
    return PolymorphismCheck(True, fam)


def contains_family(
    pair: PredicatePair, kind: str, max_arity: int, budget: int = DEFAULT_ENUM_BUDGET
) -> PolymorphismCheck:
    """Check all odd arities (every arity for OR) up to max_arity."""
    step_start = 1 if kind != OR else 1
    step = 2 if kind != OR else 1
    last = PolymorphismCheck(True, ThresholdFamily(kind, 1))
    for L in range(step_start, max_arity + 1, step):
        last = is_threshold_polymorphism(pair, ThresholdFamily(kind, L), budget)
        if not last.ok:
            return last
    return last


# ---------------------------------------------------------------------------
# Separating hyperplane vs. majority witness


@dataclass(frozen=True)
class SeparatingWeight:
    w: tuple[Fraction, ...]
    eta: Fraction

    def __post_init__(self):
        if any(v < 0 for v in self.w):
            raise ValidationError("separating weight must be entrywise nonnegative")
        if sum(self.w) != 1:
            raise ValidationError("separating weight must sum to 1")


@dataclass(frozen=True)
class MajWitness:
    """Multiset of strong tuples plus one extra whose coordinatewise majority is all -1."""

    multiplicities: tuple[tuple[tuple[int, ...], int], ...]
    extra: tuple[int, ...]

    @property
    def arity(self) -> int:
        return 1 + sum(m for _, m in self.multiplicities)

    def rows(self) -> tuple[tuple[int, ...], ...]:
        out: list[tuple[int, ...]] = []
        for t, m in self.multiplicities:
            out.extend([t] * m)
        out.append(self.extra)
        return tuple(out)

    def __post_init__(self):
        if self.arity % 2 == 0:
            raise ValidationError("majority witness must have odd arity")
        img = apply_threshold(ThresholdFamily(MAJ, self.arity), self.rows())
        if img != (-1,) * len(self.extra):
            raise ValidationError(f"witness majority image is {img}, not all -1")


def separating_hyperplane(P: Predicate) -> SeparatingWeight | MajWitness:
    """Nonnegative unit-l1 weight with w.a >= 0 on P, or a majority witness.

    Solves max eta s.t. sum(w) = 1, eta <= w.a for a in P, w >= 0 exactly;
    a negative optimum is converted through the dual into an explicit
    integer multiset witnessing (-1,...,-1) in the majority closure.
    """
    if P.is_empty:
        raise ValidationError("separating hyperplane needs a non-empty relation")
    k = P.arity
    tuples = P.tuples()
    # primal: vars w_0..w_{k-1} (nonneg), eta (free, index k)
    lp = GeneralLp(k + 1, nonneg=range(k))
    lp.add({i: 1 for i in range(k)}, "==", 1)
    for t in tuples:
        coeffs = {i: -t[i] for i in range(k)}
        coeffs[k] = 1
        lp.add(coeffs, "<=", 0)
    res = lp.solve({k: 1}, maximize=True)
    assert res.status == OPTIMAL  # always feasible and bounded
    eta = res.objective
    if eta >= 0:
        return SeparatingWeight(tuple(res.x[:k]), eta)
    # dual: vars lambda_a (nonneg), nu (free, index |P|)
    L = len(tuples)
    dual = GeneralLp(L + 1, nonneg=range(L))
    dual.add({a: 1 for a in range(L)}, "==", 1)
    for i in range(k):
        coeffs = {a: -tuples[a][i] for a in range(L)}
        coeffs[L] = 1
        dual.add(coeffs, ">=", 0)
    dres = dual.solve({L: 1}, maximize=False)
    assert dres.status == OPTIMAL and dres.objective < 0
    lam = dres.x[:L]
    N = lcm(*(v.denominator for v in lam)) if L else 1
    mults = tuple((tuples[a], int(2 * N * lam[a])) for a in range(L) if lam[a] > 0)
    return MajWitness(mults, tuples[0])


# ---------------------------------------------------------------------------
# Affine hulls and the alternating-threshold closure


@dataclass(frozen=True)
class AffineHull:
    point: tuple[Fraction, ...]
    basis: tuple[tuple[Fraction, ...], ...]

    @property
    def dimension(self) -> int:
        return len(self.basis)


def _echelon_insert(basis: list[list[Fraction]], vec: list[Fraction]) -> None:
    v = list(vec)
    for row in basis:
        lead = next(i for i, x in enumerate(row) if x != 0)
        if v[lead] != 0:
            f = v[lead]
            v = [a - f * b for a, b in zip(v, row)]
    if any(x != 0 for x in v):
        lead = next(i for i, x in enumerate(v) if x != 0)
        v = [a / v[lead] for a in v]
        basis.append(v)
        basis.sort(key=lambda row: next(i for i, x in enumerate(row) if x != 0))


def affine_hull(P: Predicate) -> AffineHull:
    """Exact direction-space basis from differences against the first tuple."""
    if P.is_empty:
        raise ValidationError("affine hull of an empty relation")
    tuples = P.tuples()
    rep = tuples[0]
    basis: list[list[Fraction]] = []
    for t in tuples[1:]:
        _echelon_insert(basis, [Fraction(a - b) for a, b in zip(t, rep)])
    return AffineHull(tuple(Fraction(v) for v in rep), tuple(tuple(row) for row in basis))


def _require_nontrivial(P: Predicate) -> None:
    fixed = P.fixed_coordinates()
    if fixed:
        raise FixedCoordinateError(
            f"coordinates {sorted(fixed)} are fixed; pin constants before this call"
        )


def o_at_membership(P: Predicate, a: Sequence[int]) -> bool:
    """Whether `a` lies in the full alternating-threshold closure of P.

    Uses the characterization of the closure as sign patterns of
    everywhere-nonzero differences of affine-hull points: membership is
    feasibility of a_i * z_i >= 1 over the direction space (the space is a
    cone, so >= 1 normalizes strict positivity).
    """
    _require_nontrivial(P)
    if len(a) != P.arity:
        raise ValidationError("tuple arity mismatch")
    hull = affine_hull(P)
    d = hull.dimension
    lp = GeneralLp(d)
    for i in range(P.arity):
        coeffs = {j: a[i] * hull.basis[j][i] for j in range(d)}
        lp.add(coeffs, ">=", 1)
    return lp.solve({}).status == OPTIMAL


def o_at_set(P: Predicate) -> Predicate:
    """All closure members, via the membership LP per sign pattern."""
    k = P.arity
    bits = 0
    for c in range(1 << k):
        t = tuple(1 if (c >> i) & 1 else -1 for i in range(k))
        if o_at_membership(P, t):
            bits |= 1 << c
    return Predicate(k, bits)


def _sumsets(tuples, count: int, budget: int) -> list[dict]:
    """reachable[j] = set of coordinate sums of size-j multisets, as a dict (no parents)."""
    k = len(tuples[0])
    zero = (0,) * k
    reachable = [{zero}]
    for _ in range(count):
        nxt = set()
        for s in reachable[-1]:
            for t in tuples:
                nxt.add(tuple(a + b for a, b in zip(s, t)))
        if len(nxt) > budget:
            raise EnumerationBudgetError(f"sumset size {len(nxt)} exceeds budget {budget}")
        reachable.append(nxt)
    return reachable


def o_maj_closure_bruteforce(
    P: Predicate, Lmax: int, budget: int = DEFAULT_ENUM_BUDGET
) -> Predicate:
    """Union of coordinatewise-majority images over odd arities <= Lmax."""
    if Lmax > 9:
        raise EnumerationBudgetError("majority closure brute force is capped at Lmax = 9")
    if P.is_empty:
        raise ValidationError("closure of an empty relation")
    tuples = P.tuples()
    reachable = _sumsets(tuples, Lmax, budget)
    bits = 0
    for L in range(1, Lmax + 1, 2):
        for s in reachable[L]:
            bits |= 1 << code_of_tuple(tuple(1 if v > 0 else -1 for v in s))
    return Predicate(P.arity, bits)


def at_closure_bruteforce(P: Predicate, Lmax: int, budget: int = DEFAULT_ENUM_BUDGET) -> Predicate:
    """Union of alternating-threshold images over odd arities <= Lmax."""
    if P.is_empty:
        raise ValidationError("closure of an empty relation")
    tuples = P.tuples()
    reachable = _sumsets(tuples, (Lmax + 1) // 2, budget)
    bits = 0
    for L in range(1, Lmax + 1, 2):
        odds, evens = reachable[(L + 1) // 2], reachable[(L - 1) // 2]
        if len(odds) * len(evens) > budget:
            raise EnumerationBudgetError("difference enumeration exceeds budget")
        for o in odds:
            for e in evens:
                d = tuple(a - b for a, b in zip(o, e))
                bits |= 1 << code_of_tuple(tuple(1 if v > 0 else -1 for v in d))
    return Predicate(P.arity, bits)


# ---------------------------------------------------------------------------
# Weighted hyperplanes for the alternating-threshold reduction


@dataclass(frozen=True)
class WeightedHyperplane:
    """Hyperplane w.y = b on a coordinate subset, with P on it and +-sgn(w) excluded.

    ``support`` lists the (0-based) coordinates the hyperplane constrains;
    for the common full-support case it is simply (0, ..., k-1).  ``target``
    is the excluded weak tuple the hyperplane was extracted for.
    """

    support: tuple[int, ...]
    w: tuple[Fraction, ...]
    b: Fraction
    target: tuple[int, ...]

    def __post_init__(self):
        if len(self.support) != len(self.w) or not self.support:
            raise ValidationError("support/weight length mismatch")
        if any(v == 0 for v in self.w):
            raise ValidationError("hyperplane weights must be nonzero")
        gap = sum(abs(v) for v in self.w)
        if not (-gap < self.b < gap):
            raise ValidationError("hyperplane does not separate the sign patterns")
        for pos, wv in zip(self.support, self.w):
            if (1 if wv > 0 else -1) != self.target[pos]:
                raise ValidationError("sgn(w) does not match the excluded tuple on the support")

    def sgn(self) -> tuple[int, ...]:
        return tuple(1 if v > 0 else -1 for v in self.w)

    def strong_predicate(self) -> Predicate:
        """All +-1 tuples over the support lying on the hyperplane."""
        s = len(self.support)
        members = [
            t
            for t in (tuple(1 if (c >> i) & 1 else -1 for i in range(s)) for c in range(1 << s))
            if sum(wi * ti for wi, ti in zip(self.w, t)) == self.b
        ]
        return Predicate.from_tuples(s, members)

    def weak_predicate(self) -> Predicate:
        s = len(self.support)
        sg = self.sgn()
        bits = Predicate.full(s).bits
        bits &= ~(1 << code_of_tuple(sg))
        bits &= ~(1 << code_of_tuple(tuple(-v for v in sg)))
        return Predicate(s, bits)


def _integer_scale(vals: Sequence[Fraction]) -> list[Fraction]:
    denom = lcm(*(v.denominator for v in vals))
    ints = [v * denom for v in vals]
    from math import gcd

    g = 0
    for v in ints:
        g = gcd(g, abs(v.numerator))
    return [v / g for v in ints] if g else list(ints)


def _positive_normal(basis, x: Sequence[int], k: int) -> list[Fraction] | None:
    """w with w_i x_i >= 1 for all i and w orthogonal to the direction space."""
    lp = GeneralLp(k)
    for row in basis:
        lp.add({i: row[i] for i in range(k) if row[i] != 0}, "==", 0)
    for i in range(k):
        lp.add({i: x[i]}, ">=", 1)
    res = lp.solve({})
    return res.x if res.status == OPTIMAL else None


def _max_support_normal(basis, x: Sequence[int], k: int) -> list[Fraction] | None:
    """Maximal-support w with w_i x_i >= 0 and w orthogonal to the direction space.

    Needed when some coordinate admits no strictly positive normal (the
    direction space meets the closed orthant boundary); the union of
    supports over the cone is attained by summing per-coordinate maximisers.
    """
    total = [Fraction(0)] * k
    for i in range(k):
        lp = GeneralLp(k)
        for row in basis:
            lp.add({j: row[j] for j in range(k) if row[j] != 0}, "==", 0)
        for j in range(k):
            lp.add({j: x[j]}, ">=", 0)
        lp.add({i: x[i]}, "<=", 1)
        res = lp.solve({i: x[i]}, maximize=True)
        if res.status == OPTIMAL and res.objective > 0:
            total = [a + b for a, b in zip(total, res.x)]
    if all(v == 0 for v in total):
        return None
    return total


def weighted_hyperplane_cover(
    pair: PredicatePair, max_check_arity: int = 7, budget: int = DEFAULT_ENUM_BUDGET
) -> list[WeightedHyperplane]:
    """One hyperplane per excluded weak tuple, jointly covering the pair.

    Every x outside Q must lie outside the alternating-threshold closure of
    P (otherwise AT is not a polymorphism and a CoverError is raised); the
    hyperplane for x comes from a positive-normal LP on the coordinate
    -flipped direction space, falling back to the maximal-support normal
    when no full-support one exists.
    """
    P, Q = pair.strong, pair.weak
    _require_nontrivial(P)
    check = contains_family(pair, AT, max_check_arity, budget)
    if not check.ok:
        raise PolymorphismError(
            f"alternating threshold of arity {check.family.arity} is not a polymorphism",
            witness=check.witness,
        )
    hull = affine_hull(P)
    basis = hull.basis
    k = P.arity
    out = []
    for x in Q.excluded_tuples():
        if o_at_membership(P, x):
            raise CoverError(
                f"excluded tuple {x} lies in the alternating-threshold closure; "
                "no hyperplane cover exists"
            )
        w = _positive_normal(basis, x, k)
        if w is None:
            w = _max_support_normal(basis, x, k)
        if w is None:
            raise CoverError(f"no orthogonal normal with signs compatible with {x}")
        support = tuple(i for i in range(k) if w[i] != 0)
        ws = _integer_scale([w[i] for i in support])
        b = sum(wi * hull.point[pos] for wi, pos in zip(ws, support))
        hp = WeightedHyperplane(support, tuple(ws), b, x)
        strong = hp.strong_predicate()
        for t in P.tuples():  # P must lie on every extracted hyperplane
            if tuple(t[pos] for pos in support) not in strong:
                raise CoverError(f"strong tuple {t} falls off the hyperplane for {x}")
        out.append(hp)
    return out
