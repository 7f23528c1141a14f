"""Finite slices of the SDP minion: orthogonal vector families and minors.

An element of arity k is a list of k pairwise-orthogonal vectors whose
squared norms sum to one (finite-dimensional stand-ins for eventually-zero
infinite sequences; zero padding never changes an inner product).  Minor
maps merge groups of vectors by summation, which preserves both defining
properties.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Instance, PcspError, ValidationError
from .sdp import SdpSolution

ORTHO_TOL = 1e-9
MINOR_CHECK_TOL = 1e-6


class MinionError(PcspError):
    pass


def _pad(rows: np.ndarray, dim: int) -> np.ndarray:
    if rows.shape[1] == dim:
        return rows
    out = np.zeros((rows.shape[0], dim))
    out[:, : rows.shape[1]] = rows
    return out


@dataclass(frozen=True)
class SdpMinionElement:
    vectors: np.ndarray  # arity x dim

    def __post_init__(self):
        object.__setattr__(self, "vectors", np.asarray(self.vectors, dtype=float))
        V = self.vectors
        if V.ndim != 2 or V.shape[0] < 1:
            raise MinionError("element needs at least one vector")
        G = V @ V.T
        off = G - np.diag(np.diag(G))
        if np.abs(off).max(initial=0.0) > ORTHO_TOL:
            raise MinionError(f"vectors not orthogonal: max cross product {np.abs(off).max():.2e}")
        total = np.trace(G)
        if abs(total - 1.0) > ORTHO_TOL:
            raise MinionError(f"squared norms sum to {total:.12f}, not 1")

    @property
    def arity(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def close_to(self, other: "SdpMinionElement", tol: float) -> bool:
        if self.arity != other.arity:
            return False
        d = max(self.dim, other.dim)
        return np.abs(_pad(self.vectors, d) - _pad(other.vectors, d)).max() <= tol


def make_element(vectors) -> SdpMinionElement:
    return SdpMinionElement(np.asarray(vectors, dtype=float))


@dataclass(frozen=True)
class MinorMap:
    source_arity: int
    target_arity: int
    mapping: tuple[int, ...]  # 0-based, position i of the source goes to mapping[i]

    def __post_init__(self):
        if len(self.mapping) != self.source_arity:
            raise ValidationError("minor map must be total on the source positions")
        if any(not 0 <= p < self.target_arity for p in self.mapping):
            raise ValidationError("minor map image out of range")

    def compose(self, then: "MinorMap") -> "MinorMap":
        if then.source_arity != self.target_arity:
            raise ValidationError("minor maps do not compose")
        return MinorMap(
            self.source_arity, then.target_arity,
            tuple(then.mapping[p] for p in self.mapping),
        )


def minor(e: SdpMinionElement, pi: MinorMap) -> SdpMinionElement:
    """Sum the vectors of each preimage group (closure holds by orthogonality)."""
    if pi.source_arity != e.arity:
        raise ValidationError(f"minor map expects arity {pi.source_arity}, element has {e.arity}")
    out = np.zeros((pi.target_arity, e.dim))
    for i, tgt in enumerate(pi.mapping):
        out[tgt] += e.vectors[i]
    return SdpMinionElement(out)


@dataclass
class SolutionElements:
    variable_elements: list[SdpMinionElement]  # index i-1 for variable i; (label -1, +1)
    constraint_elements: list[SdpMinionElement]  # one per constraint, arity 2^k
    max_minor_residual: float


def sdp_solution_to_elements(
    sol: SdpSolution, inst: Instance, zero_tol: float | None = None
) -> SolutionElements:
    """Split a zero-error solution into minion elements and check the minors.

    Variable x gets U_x = ((v0 - v_x)/2, (v0 + v_x)/2); constraint elements
    are built from sqrt(lambda)-scaled fresh orthogonal directions and then
    rotated onto the variable vectors (orthogonal Procrustes).  For every
    constraint slot the projection minor of the constraint element must
    reproduce the slot's literal element to 1e-6.
    """
    m = inst.num_constraints
    if zero_tol is None:
        zero_tol = sol.tol * max(1, m)
    if sol.objective > zero_tol:
        raise MinionError(
            f"solution has error {sol.objective:.3e} > {zero_tol:.3e}; "
            "elements exist only at zero error"
        )
    n = sol.num_vars
    d = sol.dim
    v0 = sol.vectors[0]
    var_elements = []
    for i in range(1, n + 1):
        vi = sol.vectors[i]
        var_elements.append(make_element(np.vstack([(v0 - vi) / 2.0, (v0 + vi) / 2.0])))

    def literal_element(vidx: int, sign: int) -> SdpMinionElement:
        if vidx == 0:  # constant literal with value `sign`
            rows = np.zeros((2, d))
            rows[(sign + 1) // 2] = v0
            return make_element(rows)
        if sign == 1:
            return var_elements[vidx - 1]
        return make_element(var_elements[vidx - 1].vectors[::-1])

    constraint_elements = []
    max_resid = 0.0
    for j, c in enumerate(inst.constraints):
        k = len(c.literals)
        K = 1 << k
        lam = np.clip(sol.lambdas[j], 0.0, None)
        slots = [(0, lit.sign) if lit.is_const else (lit.var, lit.sign) for lit in c.literals]
        D = d + K
        vh = np.zeros((K, D))
        for code in range(K):
            vh[code, d + code] = np.sqrt(lam[code])
        # provisional slot-value sums and their targets in the original space
        A_rows, B_rows = [], []
        for p, (vidx, sign) in enumerate(slots):
            for label in (-1, 1):
                sel = [code for code in range(K) if (1 if (code >> p) & 1 else -1) == label]
                A_rows.append(vh[sel].sum(axis=0))
                target = literal_element(vidx, sign).vectors[(label + 1) // 2]
                B_rows.append(np.concatenate([target, np.zeros(K)]))
        A, B = np.array(A_rows), np.array(B_rows)
        uu, _, vvt = np.linalg.svd(A.T @ B)
        H = uu @ vvt
        if np.abs(A @ H - B).max() > MINOR_CHECK_TOL:
            raise MinionError(
                f"constraint {j}: alignment residual {np.abs(A @ H - B).max():.2e}"
            )
        V_C = make_element(vh @ H)
        constraint_elements.append(V_C)
        for p, (vidx, sign) in enumerate(slots):
            pi = MinorMap(K, 2, tuple((code >> p) & 1 for code in range(K)))
            got = minor(V_C, pi)
            want = literal_element(vidx, sign)
            dmax = max(got.dim, want.dim)
            resid = np.abs(_pad(got.vectors, dmax) - _pad(want.vectors, dmax)).max()
            max_resid = max(max_resid, float(resid))
            if resid > MINOR_CHECK_TOL:
                raise MinionError(f"constraint {j} slot {p}: minor residual {resid:.2e}")
    return SolutionElements(var_elements, constraint_elements, max_resid)
