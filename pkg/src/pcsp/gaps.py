"""Integrality-gap machinery: configurations, PSD paths, explicit instances.

A P-configuration is a tuple of unit vectors assignable to one constraint's
literals by the relaxation at zero error; feasibility is an LP over local
distributions.  For the symmetric template families the moments have closed
forms, and equal-inner-product (alpha) configurations can be walked into
each other one vector at a time through a path of positive semidefinite
Gram matrices.  The sliding-window instance built from those ideas has a
zero-error relaxation but no weakly satisfying assignment, which
``verify_gap`` certifies by solving the relaxation and brute-forcing.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from math import comb

import numpy as np
from scipy.optimize import linprog

from .core import (
    Assignment,
    Constraint,
    Instance,
    Literal,
    PcspError,
    Predicate,
    PredicatePair,
    Template,
    ValidationError,
    brute_force_best,
    make_ham,
    serialize_instance,
)
from .sdp import build_basic_sdp, solve_basic_sdp

UNIT_TOL = 1e-9
PSD_TOL = 1e-8
FEAS_TOL = 1e-7


class DimensionError(PcspError):
    pass


class AlignmentError(PcspError):
    pass


@dataclass(frozen=True)
class Configuration:
    """k unit vectors plus the reference vector, all in dimension d."""

    v0: np.ndarray
    vectors: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "v0", np.asarray(self.v0, dtype=float))
        object.__setattr__(self, "vectors", np.asarray(self.vectors, dtype=float))
        if not np.isfinite(self.vectors).all() or not np.isfinite(self.v0).all():
            raise ValidationError("configuration entries must be finite")
        norms = np.linalg.norm(self.vectors, axis=1)
        if np.abs(norms - 1.0).max() > UNIT_TOL or abs(np.linalg.norm(self.v0) - 1) > UNIT_TOL:
            raise ValidationError("configuration vectors must be unit norm")

    @property
    def size(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def gram(self) -> np.ndarray:
        return self.vectors @ self.vectors.T

    def replaced(self, index: int, vector: np.ndarray) -> "Configuration":
        vecs = self.vectors.copy()
        vecs[index] = vector
        return Configuration(self.v0, vecs)

    def negated(self) -> "Configuration":
        return Configuration(self.v0, -self.vectors)


def check_p_configuration(
    vectors: np.ndarray, v0: np.ndarray, P: Predicate, tol: float = FEAS_TOL
) -> np.ndarray | None:
    """LP feasibility of the zero-error moment equations; the lambda or None.

    Minimizes the worst moment residual over distributions supported on P;
    feasible means the optimum is at most ``tol``.
    """
    vectors = np.asarray(vectors, dtype=float)
    k = P.arity
    if vectors.shape[0] != k:
        raise ValidationError(f"expected {k} vectors, got {vectors.shape[0]}")
    if vectors.shape[1] != len(v0):
        raise ValidationError("vector/reference dimension mismatch")
    tuples = P.tuples()
    if not tuples:
        return None
    A = np.array(tuples, dtype=float)  # |P| x k
    targets = []
    rows = []
    mu = vectors @ np.asarray(v0, dtype=float)
    for i in range(k):
        rows.append(A[:, i])
        targets.append(mu[i])
    gram = vectors @ vectors.T
    for i in range(k):
        for j in range(i + 1, k):
            rows.append(A[:, i] * A[:, j])
            targets.append(gram[i, j])
    R = np.array(rows)
    t = np.array(targets)
    nlam = len(tuples)
    # variables: lambda (nlam), residual bound s; minimize s
    A_ub = np.block([[R, -np.ones((len(t), 1))], [-R, -np.ones((len(t), 1))]])
    b_ub = np.concatenate([t, -t])
    A_eq = np.concatenate([np.ones(nlam), [0.0]])[None, :]
    res = linprog(
        c=np.concatenate([np.zeros(nlam), [1.0]]),
        A_ub=A_ub,
        b_ub=b_ub,
        A_eq=A_eq,
        b_eq=[1.0],
        bounds=[(0, None)] * nlam + [(0, None)],
        method="highs",
    )
    if res.status != 0 or res.x[-1] > tol:
        return None
    return res.x[:-1]


# ---------------------------------------------------------------------------
# Closed-form moments of the symmetric template families


@dataclass(frozen=True)
class ConfigMoments:
    family: str
    k: int
    predicate: Predicate
    first_moments: tuple[Fraction, ...]
    gram: tuple[tuple[Fraction, ...], ...]
    mixture: tuple[tuple[tuple[int, ...], Fraction], ...]  # lambda over strong tuples

    def alpha(self) -> Fraction:
        """Common off-diagonal inner product (families with uniform structure)."""
        return self.gram[0][1]


def _uniform_per_level(weights: dict[int, Fraction], k: int):
    """lambda assigning each Hamming level a mass split uniformly inside it."""
    out = []
    for t, p in sorted(weights.items()):
        level = make_ham(k, {t}).tuples()
        for a in level:
            out.append((a, p / len(level)))
    return tuple(out)


def _level_mix_moments(family: str, k: int, weights: dict[int, Fraction]) -> ConfigMoments:
    # (sum a_i)^2 = k + k(k-1) * pairwise  for weight-homogeneous mixtures
    first = sum(p * Fraction(2 * t - k, k) for t, p in weights.items())
    sq = sum(p * (2 * t - k) ** 2 for t, p in weights.items())
    alpha = Fraction(sq - k, k * (k - 1))
    gram = tuple(
        tuple(Fraction(1) if i == j else alpha for j in range(k)) for i in range(k)
    )
    pred = make_ham(k, set(weights))
    return ConfigMoments(
        family, k, pred, (first,) * k, gram, _uniform_per_level(weights, k)
    )


def symmetric_configuration_moments(
    family: str, k: int, l: int | None = None, b: int | None = None
) -> ConfigMoments:
    """Zero-error configuration moments for the five symmetric families.

    gamma1: half-weight relation, k even; gamma2: Ham{l,(k+1)/2}, k odd;
    gamma3: Ham{l,k}; gamma4: Ham{l} split on the first coordinate;
    gamma5: Ham{1,k} (the b parameter only affects the weak side).
    """
    if family == "gamma1":
        if k % 2 or k < 4:
            raise ValidationError("gamma1 needs even k >= 4")
        return _level_mix_moments(family, k, {k // 2: Fraction(1)})
    if family == "gamma2":
        if k % 2 == 0 or l is None or not 0 <= l <= (k - 1) // 2:
            raise ValidationError("gamma2 needs odd k and 0 <= l <= (k-1)/2")
        s = 2 * l - k
        return _level_mix_moments(
            family, k, {l: Fraction(1, 1 - s), (k + 1) // 2: Fraction(-s, 1 - s)}
        )
    if family == "gamma3":
        if l is None or not 0 < l <= (k - 1) // 2:
            raise ValidationError("gamma3 needs 0 < l <= (k-1)/2")
        s = 2 * l - k
        return _level_mix_moments(family, k, {l: Fraction(k, k - s), k: Fraction(-s, k - s)})
    if family == "gamma5":
        if k < 3:
            raise ValidationError("gamma5 needs k >= 3")
        return _level_mix_moments(
            family, k, {1: Fraction(k, 2 * k - 2), k: Fraction(k - 2, 2 * k - 2)}
        )
    if family == "gamma4":
        if l is None or k < 3 or not 1 <= l <= (k - 1) // 2:
            raise ValidationError("gamma4 needs k >= 3 and 1 <= l <= (k-1)/2")
        alpha = Fraction(2 * l - k, k - 1)
        beta = Fraction((2 * l - k) ** 2 - (k - 2), (k - 1) * (k - 2))
        first = (Fraction(0),) + (alpha,) * (k - 1)
        gram = [[Fraction(1)] * k for _ in range(k)]
        for i in range(1, k):
            gram[0][i] = gram[i][0] = Fraction(-1, k - 1)
            for j in range(i + 1, k):
                gram[i][j] = gram[j][i] = beta
        pred = make_ham(k, {l})
        mix = []
        for side in (1, -1):
            part = [a for a in pred.tuples() if a[0] == side]
            for a in part:
                mix.append((a, Fraction(1, 2 * len(part))))
        return ConfigMoments(
            family, k, pred, first, tuple(tuple(r) for r in gram), tuple(mix)
        )
    raise ValidationError(f"unknown family {family!r}")


def regular_simplex_vectors(
    k: int, alpha: float, d: int, v0: np.ndarray | None = None
) -> np.ndarray:
    """k unit vectors with common pairwise inner product, orthogonal to v0.

    Realized by eigendecomposition of (1-alpha) I + alpha J inside the
    orthogonal complement of v0; alpha may sit on the PSD boundary
    -1/(k-1) up to 1e-9 below it.
    """
    alpha = float(alpha)
    if alpha < -1.0 / (k - 1) - 1e-9 or alpha > 1.0:
        raise ValidationError(f"no simplex with pairwise inner product {alpha}")
    if d < k + 1:
        raise DimensionError(f"need dimension >= {k + 1}")
    if v0 is None:
        v0 = np.eye(d)[0]
    v0 = np.asarray(v0, dtype=float)
    G = np.full((k, k), alpha)
    np.fill_diagonal(G, 1.0)
    evals, evecs = np.linalg.eigh(G)
    M = evecs * np.sqrt(np.clip(evals, 0.0, None))  # rows realize G in k dims
    # deterministic orthonormal basis of the complement of v0
    e = np.eye(d)[0]
    u = v0 - e
    B = np.eye(d)
    if np.linalg.norm(u) > 1e-12:
        u = u / np.linalg.norm(u)
        B = B - 2.0 * np.outer(B @ u, u)
    # columns 1..k of the reflected identity span part of v0-perp
    basis = B[1: k + 1]
    out = M @ basis
    if np.abs(out @ out.T - G).max() > UNIT_TOL:
        raise ValidationError("simplex realization failed to reproduce the Gram matrix")
    return out


# ---------------------------------------------------------------------------
# PSD interpolation paths and configuration connectivity


@dataclass(frozen=True)
class PsdPathStep:
    matrix: np.ndarray
    gamma_step: int
    d: int

    def __post_init__(self):
        object.__setattr__(self, "matrix", np.asarray(self.matrix, dtype=float))
        M = self.matrix
        if np.abs(M - M.T).max() > 0:
            raise ValidationError("path matrices must be symmetric")
        if np.abs(np.diag(M) - 1.0).max() > UNIT_TOL:
            raise ValidationError("path matrices must have unit diagonal")
        if np.linalg.eigvalsh(M).min() < -PSD_TOL:
            raise ValidationError("path matrix is not positive semidefinite")


def _interp_matrix(k: int, alpha: float, eps: float, g: int, d: int) -> np.ndarray:
    # last-column entries are integer multiples of eps so that consecutive
    # steps share bitwise-identical unchanged entries
    M = np.full((k + 1, k + 1), alpha)
    np.fill_diagonal(M, 1.0)
    counts = np.array([g + 1 if i < d else g for i in range(k)], dtype=float)
    M[k, :k] = M[:k, k] = counts * eps
    return M


def psd_path(k: int, alpha: float) -> list[PsdPathStep]:
    """Unit-diagonal PSD path from zero last column to all off-diagonal alpha.

    Consecutive matrices differ in exactly one last-row/column entry pair;
    PSD is preserved because the per-step increment never exceeds
    (1-alpha)/k.
    """
    if not 0 <= alpha < 1:
        raise ValidationError("alpha must lie in [0, 1)")
    steps = [PsdPathStep(_interp_matrix(k, alpha, 0.0, 0, 0), 0, k)]
    if alpha == 0:
        return steps
    eps_max = (1.0 - alpha) / k
    G = int(np.ceil(alpha / eps_max - 1e-12))
    eps = alpha / G
    for g in range(G):
        for d in range(1, k + 1):
            steps.append(PsdPathStep(_interp_matrix(k, alpha, eps, g, d), g, d))
    return steps


def realize_path_vectors(
    path: list[PsdPathStep], U: Configuration, w: np.ndarray
) -> list[Configuration]:
    """Per-step vector realizations changing exactly one column each.

    The changed vector is re-realized from the new Gram matrix and aligned
    to the unchanged block with the polar factor of the cross-Gram; all
    other vectors are kept bitwise unchanged.
    """
    if not path:
        return [U]
    w = np.asarray(w, dtype=float)
    k = U.size
    if U.dim < k + 2:
        raise DimensionError("ambient dimension too small to realize the path")
    current = np.vstack([U.vectors, w])
    if np.abs(current @ current.T - path[0].matrix).max() > FEAS_TOL:
        raise AlignmentError("initial configuration does not match the first path matrix")
    configs = [U]
    prev = path[0].matrix
    for step in path[1:]:
        diff = np.abs(step.matrix - prev)
        changed = np.nonzero(diff[:, k] > 0)[0]
        if len(changed) != 1:
            raise AlignmentError("path step changes more than one entry")
        j = int(changed[0])
        evals, evecs = np.linalg.eigh(step.matrix)
        R = evecs * np.sqrt(np.clip(evals, 0.0, None))
        Rp = np.zeros((k + 1, U.dim))
        Rp[:, : k + 1] = R
        others = [i for i in range(k + 1) if i != j]
        A, B = Rp[others], current[others]
        uu, _, vv = np.linalg.svd(A.T @ B)
        H = uu @ vv
        if np.abs(A @ H - B).max() > FEAS_TOL:
            raise AlignmentError("orthogonal alignment residual too large")
        new_vec = Rp[j] @ H
        current = current.copy()
        current[j] = new_vec
        if np.abs(current @ current.T - step.matrix).max() > FEAS_TOL:
            raise AlignmentError("realized Gram drifted from the path matrix")
        configs.append(Configuration(U.v0, current[:k]))
        prev = step.matrix
    return configs


def connect_to_vector(U: Configuration, w: np.ndarray, alpha: float) -> list[Configuration]:
    """Path of alpha-configurations from U to one containing w (as the last vector)."""
    path = psd_path(U.size, alpha)
    configs = realize_path_vectors(path, U, w)
    last = configs[-1]
    configs.append(last.replaced(U.size - 1, np.asarray(w, dtype=float)))
    return configs


def _orthogonal_unit(rows: np.ndarray) -> np.ndarray:
    """Deterministic unit vector orthogonal to all given rows."""
    _, s, vh = np.linalg.svd(rows)
    cand = vh[-1]
    if rows.shape[0] >= rows.shape[1] and (len(s) == rows.shape[1] and s[-1] > 1e-9):
        raise DimensionError("no orthogonal direction left")
    if np.abs(rows @ cand).max() > UNIT_TOL:
        raise DimensionError("could not find an orthogonal direction")
    return cand / np.linalg.norm(cand)


def _complement_basis(w: np.ndarray) -> np.ndarray:
    """(d-1) x d orthonormal basis of the complement of unit w (deterministic)."""
    d = len(w)
    e = np.eye(d)[0]
    u = w - e
    H = np.eye(d)
    if np.linalg.norm(u) > 1e-12:
        u = u / np.linalg.norm(u)
        H = H - 2.0 * np.outer(H @ u, u)
    # H maps w to e1; rows 1.. of H form a basis of w-perp
    return H[1:]


def alpha_path_length_bound(k: int, alpha: float) -> int:
    """Recursive length bound mirroring the construction."""
    if k <= 1:
        return 2
    leg = len(psd_path(k, alpha)) + 1
    return 2 * leg + alpha_path_length_bound(k - 1, alpha / (1 + alpha))


def alpha_path(
    U: Configuration, V: Configuration, k: int, alpha: float
) -> list[Configuration]:
    """Path of alpha-configurations from U to V changing one vector per step.

    Recursive: both endpoints are first walked to configurations containing
    a fresh direction w, then the components orthogonal to w (which form
    alpha/(1+alpha) configurations after normalization) are connected in
    the complement and lifted back.  Needs ambient dimension >= 4k+4.
    """
    if U.size != k or V.size != k:
        raise ValidationError("configuration size mismatch")
    if U.dim < 4 * k + 4:
        raise DimensionError(f"alpha paths need dimension >= {4 * k + 4}")
    if np.abs(U.vectors - V.vectors).max() <= 1e-12:
        return [U]
    if k == 1:
        return [U, V]
    stack = np.vstack([U.vectors, V.vectors, U.v0[None, :]])
    w = _orthogonal_unit(stack)
    pU = connect_to_vector(U, w, alpha)
    pV = connect_to_vector(V, w, alpha)
    X, Y = pU[-1], pV[-1]
    scale = float(np.sqrt(1.0 - alpha * alpha))
    Bw = _complement_basis(w)

    def project(C: Configuration) -> Configuration:
        inner = (C.vectors[: k - 1] - alpha * w[None, :]) / scale
        return Configuration(C.v0 @ Bw.T, inner @ Bw.T)

    def lift(C: Configuration) -> Configuration:
        vecs = C.vectors @ Bw * scale + alpha * w[None, :]
        return Configuration(U.v0, np.vstack([vecs, w[None, :]]))

    inner_path = alpha_path(project(X), project(Y), k - 1, alpha / (1.0 + alpha))
    middle = [lift(c) for c in inner_path]
    return pU + middle[1:] + pV[-2::-1]


# ---------------------------------------------------------------------------
# Explicit sliding-window gap instances


def gamma5_pair(k: int, b: int) -> PredicatePair:
    if k < 3 or b not in set(range(k + 1)) - {1, k}:
        raise ValidationError("need k >= 3 and b in {0..k} minus {1, k}")
    return PredicatePair(make_ham(k, {1, k}), make_ham(k, set(range(k + 1)) - {b}))


def gamma5_subset_count(k: int, L: int, max_vars: int | None) -> int:
    total = comb(2 * k - 1, k)
    if max_vars is None:
        return total
    r = (max_vars - (2 * k - 1)) // L
    if r < 1:
        raise ValidationError(f"cannot fit any window chain within {max_vars} variables")
    return min(total, r)


def build_gamma5_gap(k: int, b: int, L: int, max_vars: int | None = None) -> Instance:
    """Sliding-window chain instance over 2k-1 base variables.

    Each k-subset S of the base variables gets L auxiliary variables and
    the k+L+1 width-k windows of the sequence (x_S, aux, negated x_S).
    When ``max_vars`` is given, only the first subsets (in lexicographic
    order) that fit are kept; the certificate records that restriction.
    """
    pair = gamma5_pair(k, b)
    if L < k:
        raise ValidationError("chain length L must be at least k")
    tmpl = Template((pair,))
    base = 2 * k - 1
    subsets = list(combinations(range(1, base + 1), k))[: gamma5_subset_count(k, L, max_vars)]
    constraints = []
    next_var = base
    for S in subsets:
        aux = list(range(next_var + 1, next_var + L + 1))
        next_var += L
        seq = (
            [Literal.pos(i) for i in S]
            + [Literal.pos(a) for a in aux]
            + [Literal.neg(i) for i in S]
        )
        for t in range(len(seq) - k + 1):
            constraints.append(Constraint(0, tuple(seq[t: t + k])))
    return Instance(next_var, tmpl, tuple(constraints))


def gamma5_auto_L(k: int, seed_dim: int | None = None) -> int:
    """Measured connectivity length between a simplex configuration and its
    negation at alpha = (k-3)/(k-1), plus k slack."""
    alpha = (k - 3) / (k - 1)
    d = seed_dim or (4 * k + 4)
    v0 = np.eye(d)[0]
    U = Configuration(v0, regular_simplex_vectors(k, alpha, d))
    path = alpha_path(U, U.negated(), k, alpha)
    return len(path) + k


@dataclass(frozen=True)
class GapCertificate:
    """Reproducible record of a basic-SDP integrality gap check."""

    instance: Instance
    objective: float
    weak_best: Fraction
    verdict: bool
    tol: float
    notes: str = ""

    def to_json(self) -> str:
        doc = {
            "format": "pcsp-gap-certificate v1",
            "verdict": self.verdict,
            "objective": format(self.objective, ".17g"),
            "weak_best": str(self.weak_best),
            "weak_best_float": float(self.weak_best),
            "tol": format(self.tol, ".17g"),
            "num_vars": self.instance.num_vars,
            "num_constraints": self.instance.num_constraints,
            "notes": self.notes,
            "instance": serialize_instance(self.instance),
        }
        return json.dumps(doc, indent=1)


def verify_gap(
    inst: Instance, tol: float = 1e-6, cap: int | None = None, notes: str = ""
) -> GapCertificate:
    """Solve the relaxation and brute-force the weak optimum.

    Verdict true means the relaxation objective is at most tol*max(1,m)
    while no assignment weakly satisfies everything.
    """
    sol = solve_basic_sdp(build_basic_sdp(inst), tol=tol)
    _, weak_best = brute_force_best(inst, "weak", cap=cap)
    m = inst.num_constraints
    verdict = sol.objective <= tol * max(1, m) and weak_best < 1
    return GapCertificate(inst, sol.objective, weak_best, verdict, tol, notes)
