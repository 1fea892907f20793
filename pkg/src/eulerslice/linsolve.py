"""Linear solvers: restarted GMRES, dense direct solves, exact block-diagonal
inverses and SVD-based condition numbers.

GMRES is written out (Arnoldi with modified Gram-Schmidt and Givens
rotations) rather than wrapping scipy so that iteration accounting, the
residual history and restart semantics match the solver-efficiency
diagnostics exactly; iteration_count is the total number of Arnoldi steps.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class LinearSolveError(RuntimeError):
    def __init__(self, msg, iterations=None, residual=None, history=None):
        super().__init__(msg)
        self.iterations = iterations
        self.residual = residual
        self.history = history if history is not None else []


@dataclass
class LinearSolverCfg:
    rtol: float = 1.0e-10
    atol: float = 0.0
    restart: int = 30
    max_iters: int = 200
    preconditioner: str = "diagonal"   # "none" or "diagonal"

    def __post_init__(self):
        if self.rtol < 0.0 or self.atol < 0.0:
            raise ValueError("tolerances must be nonnegative")
        if self.restart < 1:
            raise ValueError("restart must be at least 1")
        if self.preconditioner not in ("none", "diagonal"):
            raise ValueError("preconditioner must be 'none' or 'diagonal'")


def gmres(apply, rhs, cfg, precond_diag=None):
    """Restarted GMRES with right preconditioning.

    apply: callable mapping a vector to A @ v.  Returns (solution,
    iteration_count, final_residual); raises LinearSolveError carrying the
    residual history if max_iters is exhausted.
    """
    b = np.asarray(rhs, dtype=float)
    n = b.size
    x = np.zeros(n)
    bnorm = np.linalg.norm(b)
    tol = max(cfg.rtol * bnorm, cfg.atol)
    if bnorm == 0.0:
        return x, 0, 0.0

    if precond_diag is not None and cfg.preconditioner == "diagonal":
        dinv = 1.0 / precond_diag
        right = lambda v: dinv * v
    else:
        right = lambda v: v

    # history records the true residual norm at each restart boundary (plus
    # the final one); restarting minimises over a space containing the
    # previous iterate, so this sequence is non-increasing
    history = []
    total = 0
    res = bnorm
    while total < cfg.max_iters:
        r = b - apply(x)
        res = np.linalg.norm(r)
        if res <= tol:
            history.append(res)
            return x, total, res
        if history and res >= history[-1] * (1.0 - 1e-12):
            # a whole restart cycle made no progress: attainable accuracy hit
            res = min(res, history[-1])
            raise LinearSolveError(
                f"GMRES stagnated at residual {res:.3e} "
                f"(target {tol:.3e}) after {total} iterations",
                iterations=total, residual=res, history=history)
        history.append(res)
        m = min(cfg.restart, cfg.max_iters - total)
        Q = np.zeros((n, m + 1))
        H = np.zeros((m + 1, m))
        cs, sn = np.zeros(m), np.zeros(m)
        g = np.zeros(m + 1)
        g[0] = res
        Q[:, 0] = r / res
        k_used = 0
        for k in range(m):
            # copy: apply may return its argument aliased (e.g. the identity)
            w = np.array(apply(right(Q[:, k])), dtype=float, copy=True)
            for i in range(k + 1):
                H[i, k] = Q[:, i] @ w
                w -= H[i, k] * Q[:, i]
            H[k + 1, k] = np.linalg.norm(w)
            breakdown = H[k + 1, k] == 0.0
            if not breakdown:
                Q[:, k + 1] = w / H[k + 1, k]
            for i in range(k):
                t = cs[i] * H[i, k] + sn[i] * H[i + 1, k]
                H[i + 1, k] = -sn[i] * H[i, k] + cs[i] * H[i + 1, k]
                H[i, k] = t
            nu = np.hypot(H[k, k], H[k + 1, k])
            if nu == 0.0:
                cs[k], sn[k] = 1.0, 0.0
            else:
                cs[k], sn[k] = H[k, k] / nu, H[k + 1, k] / nu
            H[k, k] = cs[k] * H[k, k] + sn[k] * H[k + 1, k]
            H[k + 1, k] = 0.0
            g[k + 1] = -sn[k] * g[k]
            g[k] = cs[k] * g[k]
            total += 1
            k_used = k + 1
            res = abs(g[k + 1])
            if res <= tol or breakdown:
                break  # converged, or the solution lies in the current subspace
        y = np.linalg.solve(H[:k_used, :k_used], g[:k_used])
        x = x + right(Q[:, :k_used] @ y)
        if res <= tol:
            r = b - apply(x)
            return x, total, np.linalg.norm(r)
    r = b - apply(x)
    res = np.linalg.norm(r)
    if res <= tol:
        return x, total, res
    raise LinearSolveError(
        f"GMRES failed to converge in {total} iterations "
        f"(residual {res:.3e}, target {tol:.3e})",
        iterations=total, residual=res, history=history)


def dense_solve(matrix, rhs):
    """Direct dense solve; raises on matrices singular to working precision."""
    A = np.asarray(matrix, dtype=float)
    try:
        return np.linalg.solve(A, np.asarray(rhs, dtype=float))
    except np.linalg.LinAlgError as e:
        raise LinearSolveError(f"dense solve failed: {e}") from e


def block_diag_inverse_apply(M, v):
    """Exact inverse application of a cell-block-diagonal W3 matrix.

    At lowest order the blocks are 1x1, so this is a guarded elementwise
    division by the diagonal.
    """
    if sp.issparse(M):
        d = M.diagonal()
        nnz_off = M.nnz - np.count_nonzero(d)
        if nnz_off > 0 and abs(M - sp.diags(d)).max() > 0.0:
            raise ValueError("matrix is not block-diagonal over cells")
    else:
        d = np.asarray(M, dtype=float)
    if np.any(d == 0.0):
        raise ValueError("zero diagonal block")
    return np.asarray(v, dtype=float) / d


def condition_number(A, dense_limit=2000):
    """Ratio of extreme singular values.

    Dense SVD up to dense_limit unknowns; beyond that a power-iteration
    estimate of the largest singular value combined with an inverse
    iteration (sparse LU) for the smallest.
    """
    n = A.shape[0]
    if n <= dense_limit:
        Ad = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)
        svals = np.linalg.svd(Ad, compute_uv=False)
        if svals[-1] == 0.0:
            raise LinearSolveError("singular operator")
        return float(svals[0] / svals[-1])
    As = A.tocsc() if sp.issparse(A) else sp.csc_matrix(A)
    try:
        lu = spla.splu(As)
    except RuntimeError as e:
        raise LinearSolveError(f"singular operator: {e}") from e
    rng = np.random.default_rng(0)
    v0 = rng.standard_normal(n)
    fwd = spla.LinearOperator((n, n), matvec=lambda x: As.T @ (As @ x))
    inv = spla.LinearOperator(
        (n, n), matvec=lambda x: lu.solve(lu.solve(x, trans="T")))
    lmax = spla.eigsh(fwd, k=1, which="LA", v0=v0, tol=1e-10,
                      return_eigenvectors=False)[0]
    mmax = spla.eigsh(inv, k=1, which="LA", v0=v0, tol=1e-10,
                      return_eigenvectors=False)[0]
    if lmax <= 0.0 or mmax <= 0.0:
        raise LinearSolveError("singular operator")
    return float(np.sqrt(lmax * mmax))


class ApproxInverse:
    """Uniform handle for the W2-family mass inverses.

    Lumped mode wraps a diagonal vector; exact mode wraps a sparse LU of the
    (active-dof) matrix.  to_matrix() densifies the exact inverse and is
    restricted to small problems (all 1D studies).
    """

    def __init__(self, diag=None, lu=None, n=None, matrix=None):
        if (diag is None) == (lu is None):
            raise ValueError("exactly one of diag/lu must be given")
        self.diag = diag
        self.lu = lu
        self.n = diag.size if diag is not None else n
        self._matrix = matrix

    @classmethod
    def lumped(cls, M):
        from .assembly import lumped_diag
        return cls(diag=1.0 / lumped_diag(M))

    @classmethod
    def from_diag_of(cls, diag_vec):
        return cls(diag=1.0 / np.asarray(diag_vec, dtype=float))

    @classmethod
    def exact(cls, M, dense_limit=2500):
        if M.shape[0] > dense_limit:
            raise ValueError(
                "exact mass inverses are restricted to small (1D-scale) "
                f"problems; got {M.shape[0]} dofs")
        return cls(lu=spla.splu(M.tocsc()), n=M.shape[0], matrix=M)

    @property
    def is_lumped(self):
        return self.diag is not None

    def dot(self, v):
        if self.diag is not None:
            return self.diag * v
        return self.lu.solve(np.asarray(v, dtype=float))

    def to_matrix(self):
        """Inverse as an array usable in sparse products."""
        if self.diag is not None:
            return sp.diags(self.diag).tocsr()
        return np.linalg.inv(self._matrix.toarray())
