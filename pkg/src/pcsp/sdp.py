"""Basic SDP relaxation of Boolean folded instances: build, solve, extract.

The program has one unit vector per variable plus a reference vector v0,
a local distribution lambda_j over the 2^k slot assignments of each
constraint, and per-constraint errors eps_j = 1 - (strong mass of
lambda_j).  Negated literals enter the moment equations with sign -1 and
constants as +-v0, so every moment row reads

    sum_t lambda_j(t) * (t-products)  ==  sign * X[i, i']

with X the (n+1) x (n+1) Gram block (row 0 is v0).  Duplicate literals
inside a constraint make some rows reference X[i, i] = 1; those become
plain consistency rows on lambda, matching the relaxation verbatim.

Solving goes through cvxpy to a deterministic conic interior-point backend
(Clarabel by default); vectors are realized from the PSD-projected Gram by
symmetric eigendecomposition and rotated so v0 is the first basis vector.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .core import Assignment, Instance, PcspError

DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITERS = 200


class SdpSolveError(PcspError):
    pass


@dataclass
class SdpProgram:
    """Sparse description of the relaxation for one instance."""

    instance: Instance
    num_vars: int
    num_lambda: int
    lam_offsets: np.ndarray  # per-constraint start into the lambda vector
    arities: list[int]
    strong_masks: list[np.ndarray]  # bool over local assignment codes
    objective_weights: np.ndarray  # strong-membership indicator per lambda entry
    A_plain: sp.csr_matrix
    b_plain: np.ndarray
    A_gram: sp.csr_matrix
    gram_i: np.ndarray
    gram_j: np.ndarray
    gram_coef: np.ndarray

    @property
    def num_constraints(self) -> int:
        return len(self.arities)


def _slot_products(k: int) -> np.ndarray:
    """(k, 2^k) matrix of slot values: entry [p, c] is +1 iff bit p of c is set."""
    codes = np.arange(1 << k)
    return np.where((codes[None, :] >> np.arange(k)[:, None]) & 1, 1, -1).astype(np.int8)


def build_basic_sdp(inst: Instance) -> SdpProgram:
    n = inst.num_vars
    lam_offsets = []
    arities = []
    strong_masks = []
    obj = []
    plain_rows: list[tuple[int, np.ndarray, float]] = []  # (lam offset, coeffs, rhs)
    gram_rows: list[tuple[int, np.ndarray, int, int, int]] = []  # (+ (i, j, coef))
    off = 0
    fm_cache: dict[int, np.ndarray] = {}
    for c in inst.constraints:
        pair = inst.template.pairs[c.pair_index]
        k = pair.arity
        if k not in fm_cache:
            fm_cache[k] = _slot_products(k)
        fm = fm_cache[k]
        lam_offsets.append(off)
        arities.append(k)
        mask = np.array([pair.strong.contains_code(cc) for cc in range(1 << k)], dtype=bool)
        strong_masks.append(mask)
        obj.append(mask.astype(np.float64))
        slots = [(0, lit.sign) if lit.is_const else (lit.var, lit.sign) for lit in c.literals]
        plain_rows.append((off, np.ones(1 << k), 1.0))  # normalization
        for p, (vp, sp_) in enumerate(slots):
            row = fm[p].astype(np.float64)
            if vp == 0:
                plain_rows.append((off, row, float(sp_)))
            else:
                gram_rows.append((off, row, 0, vp, sp_))
        for p in range(k):
            for q in range(p + 1, k):
                vp, sp_ = slots[p]
                vq, sq = slots[q]
                row = (fm[p] * fm[q]).astype(np.float64)
                if vp == vq:
                    plain_rows.append((off, row, float(sp_ * sq)))
                else:
                    i, j = min(vp, vq), max(vp, vq)
                    gram_rows.append((off, row, i, j, sp_ * sq))
        off += 1 << k
    num_lambda = off

    def assemble(rows_data, with_gram):
        data, ridx, cidx = [], [], []
        extras = []
        for r, item in enumerate(rows_data):
            o, row = item[0], item[1]
            nz = np.nonzero(row)[0]
            data.append(row[nz])
            cidx.append(nz + o)
            ridx.append(np.full(len(nz), r))
            extras.append(item[2:])
        mat = sp.csr_matrix(
            (np.concatenate(data) if data else [],
             (np.concatenate(ridx) if ridx else [], np.concatenate(cidx) if cidx else [])),
            shape=(len(rows_data), num_lambda),
        )
        return mat, extras

    A_plain, plain_extras = assemble(plain_rows, False)
    b_plain = np.array([e[0] for e in plain_extras], dtype=np.float64)
    A_gram, gram_extras = assemble(gram_rows, True)
    gram_i = np.array([e[0] for e in gram_extras], dtype=np.int64)
    gram_j = np.array([e[1] for e in gram_extras], dtype=np.int64)
    gram_coef = np.array([e[2] for e in gram_extras], dtype=np.float64)
    return SdpProgram(
        instance=inst,
        num_vars=n,
        num_lambda=num_lambda,
        lam_offsets=np.array(lam_offsets, dtype=np.int64),
        arities=arities,
        strong_masks=strong_masks,
        objective_weights=np.concatenate(obj) if obj else np.zeros(0),
        A_plain=A_plain,
        b_plain=b_plain,
        A_gram=A_gram,
        gram_i=gram_i,
        gram_j=gram_j,
        gram_coef=gram_coef,
    )


@dataclass
class SdpSolution:
    """Realized vectors, local distributions and per-constraint errors."""

    dim: int
    vectors: np.ndarray  # rows v0, v1, ..., vn
    lambdas: list[np.ndarray]
    errors: np.ndarray
    objective: float
    tol: float
    max_residual: float = 0.0

    @property
    def num_vars(self) -> int:
        return self.vectors.shape[0] - 1

    @property
    def v0(self) -> np.ndarray:
        return self.vectors[0]

    def mu(self) -> np.ndarray:
        return self.vectors[1:] @ self.vectors[0]

    def negated(self) -> "SdpSolution":
        """Flip every variable vector (v0 stays); the antipodal solution."""
        vecs = self.vectors.copy()
        vecs[1:] *= -1.0
        return SdpSolution(
            self.dim, vecs, [l.copy() for l in self.lambdas], self.errors.copy(),
            self.objective, self.tol, self.max_residual,
        )


@dataclass
class MomentData:
    mu: np.ndarray
    sigma: np.ndarray


def extract_moments(sol: SdpSolution) -> MomentData:
    V = sol.vectors[1:]
    sigma = V @ V.T
    return MomentData(mu=V @ sol.vectors[0], sigma=(sigma + sigma.T) / 2.0)


_SOLVER_ORDER = ("CLARABEL", "SCS", "CVXOPT")


def _solve_cone_program(prog: SdpProgram, tol: float, max_iters: int, solver: str | None):
    import cvxpy as cp

    n = prog.num_vars
    X = cp.Variable((n + 1, n + 1), PSD=True)
    constraints = [cp.diag(X) == 1]
    if prog.num_lambda:
        lam = cp.Variable(prog.num_lambda, nonneg=True)
        constraints.append(prog.A_plain @ lam == prog.b_plain)
        if prog.gram_i.size:
            constraints.append(
                prog.A_gram @ lam == cp.multiply(prog.gram_coef, X[prog.gram_i, prog.gram_j])
            )
        objective = cp.Maximize(prog.objective_weights @ lam)
    else:
        lam = None
        objective = cp.Maximize(0)
    problem = cp.Problem(objective, constraints)
    solvers = (solver,) if solver else _SOLVER_ORDER
    eps = min(tol * 1e-2, 1e-8)
    last_exc = None
    for name in solvers:
        if name not in cp.installed_solvers():
            continue
        try:
            if name == "CLARABEL":
                problem.solve(
                    solver=name,
                    max_iter=max_iters,
                    tol_gap_abs=eps,
                    tol_gap_rel=eps,
                    tol_feas=eps,
                )
            elif name == "SCS":
                problem.solve(solver=name, max_iters=max(max_iters * 500, 50000), eps=eps)
            else:
                problem.solve(solver=name)
        except cp.SolverError as exc:  # pragma: no cover - backend dependent
            last_exc = exc
            continue
        if problem.status in ("optimal", "optimal_inaccurate"):
            return X.value, (lam.value if lam is not None else np.zeros(0))
    raise SdpSolveError(f"no conic backend solved the program: {last_exc}")


def solve_basic_sdp(
    prog: SdpProgram,
    tol: float = DEFAULT_TOL,
    max_iters: int = DEFAULT_MAX_ITERS,
    solver: str | None = None,
) -> SdpSolution:
    """Solve to additive accuracy tol per constraint and realize unit vectors.

    Raises SdpSolveError when the backend fails to converge or the returned
    Gram block is further than 10*tol from the PSD cone; the error message
    carries the residuals.
    """
    if tol <= 0:
        raise SdpSolveError("tol must be positive")
    n = prog.num_vars
    m = prog.num_constraints
    if m == 0:
        vectors = np.eye(n + 1)
        return SdpSolution(n + 1, vectors, [], np.zeros(0), 0.0, tol)
    Xv, lam = _solve_cone_program(prog, tol, max_iters, solver)
    Xs = (Xv + Xv.T) / 2.0

    evals, evecs = np.linalg.eigh(Xs)
    if evals.min() < -10 * tol:
        raise SdpSolveError(f"Gram block indefinite: min eigenvalue {evals.min():.3e}")
    M = evecs * np.sqrt(np.clip(evals, 0.0, None))
    norms = np.linalg.norm(M, axis=1)
    if np.abs(norms - 1.0).max() > 10 * tol:
        raise SdpSolveError(f"unit-norm violation {np.abs(norms - 1.0).max():.3e}")
    M /= norms[:, None]
    # rotate so v0 is the first basis direction
    v0 = M[0]
    u = v0 - np.eye(n + 1)[0]
    nu = np.linalg.norm(u)
    if nu > 1e-12:
        u /= nu
        M = M - 2.0 * np.outer(M @ u, u)
    M[0] = 0.0
    M[0, 0] = 1.0

    lambdas = []
    errors = np.zeros(m)
    for j in range(m):
        k = prog.arities[j]
        block = np.clip(lam[prog.lam_offsets[j]: prog.lam_offsets[j] + (1 << k)], 0.0, None)
        s = block.sum()
        if abs(s - 1.0) > 10 * tol:
            raise SdpSolveError(f"local distribution {j} sums to {s:.6f}")
        block = block / s
        lambdas.append(block)
        errors[j] = min(max(1.0 - block[prog.strong_masks[j]].sum(), 0.0), 1.0)
    # residuals of the moment equations against the realized Gram
    lam_clean = np.concatenate(lambdas)
    X_real = M @ M.T
    res_plain = prog.A_plain @ lam_clean - prog.b_plain
    max_res = np.abs(res_plain).max() if res_plain.size else 0.0
    if prog.gram_i.size:
        res_gram = prog.A_gram @ lam_clean - prog.gram_coef * X_real[prog.gram_i, prog.gram_j]
        max_res = max(max_res, np.abs(res_gram).max())
    if max_res > 100 * tol:
        raise SdpSolveError(f"moment residual {max_res:.3e} exceeds budget at tol {tol:g}")
    return SdpSolution(n + 1, M, lambdas, errors, float(errors.sum()), tol, float(max_res))


def solve_instance(
    inst: Instance, tol: float = DEFAULT_TOL, max_iters: int = DEFAULT_MAX_ITERS,
    solver: str | None = None,
) -> SdpSolution:
    return solve_basic_sdp(build_basic_sdp(inst), tol, max_iters, solver)


# ---------------------------------------------------------------------------
# Solution dump format: JSON with 17-significant-digit decimal strings.


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def dump_solution(sol: SdpSolution) -> str:
    doc = {
        "format": "pcsp-sdp-solution v1",
        "dimension": sol.dim,
        "num_vars": sol.num_vars,
        "tol": _fmt(sol.tol),
        "objective": _fmt(sol.objective),
        "max_residual": _fmt(sol.max_residual),
        "vectors": [[_fmt(x) for x in row] for row in sol.vectors],
        "constraints": [
            {"lambda": [_fmt(x) for x in l], "epsilon": _fmt(e)}
            for l, e in zip(sol.lambdas, sol.errors)
        ],
    }
    return json.dumps(doc, indent=1)


def load_solution(text: str) -> SdpSolution:
    doc = json.loads(text)
    if doc.get("format") != "pcsp-sdp-solution v1":
        raise SdpSolveError("not a solution document")
    vectors = np.array([[float(x) for x in row] for row in doc["vectors"]])
    lambdas = [np.array([float(x) for x in c["lambda"]]) for c in doc["constraints"]]
    errors = np.array([float(c["epsilon"]) for c in doc["constraints"]])
    return SdpSolution(
        int(doc["dimension"]), vectors, lambdas, errors,
        float(doc["objective"]), float(doc["tol"]), float(doc["max_residual"]),
    )
