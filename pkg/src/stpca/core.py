"""Spatial-temporal PCA core: reduce an n x m series to one latent series.

Given a row-centered data matrix X (n variables, m time points), stPCA looks
for an L x n weight matrix W, with unit Frobenius norm, whose projection
Z = W X behaves like a delay embedding of a single scalar series.  The two
competing goals, projected variance and delay consistency, are weighted by
lam in [0, 1]:

    minimize_W   -(1 - lam) * sum_{i=1}^{L}   ||W_i X||^2
                 +     lam  * sum_{i=1}^{L-1} ||W_i P - W_{i+1} Q||^2

subject to ||W||_F = 1, where P = X[:, 1:] drops the first column and
Q = X[:, :-1] drops the last.  The second term asks row i of Z, advanced by
one step, to agree with row i+1, which is exactly the Hankel property.

Writing V for W flattened row-wise, the objective is the quadratic form
V' (-H) V with H symmetric block tridiagonal in n x n blocks:

    diagonal    (1-lam) Cxx - lam Cpp             (first block)
                (1-lam) Cxx - lam (Cpp + Cqq)     (interior blocks)
                (1-lam) Cxx - lam Cqq             (last block)
    super-diag  lam Cpq        sub-diag  lam Cpq'

with Gram matrices Cxx = X X', Cpp = P P', Cqq = Q Q', Cpq = P Q'.  The
constrained minimum is attained at the eigenvector of the largest algebraic
eigenvalue alpha of H, and the attained objective equals -alpha.

The block structure keeps one operator application at O(L n^2); the full
nL x nL matrix is only ever assembled for small problems.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg

from .errors import (
    ConvergenceError,
    InvalidDataError,
    ParameterError,
    ShapeError,
)
from .hankel import extract_latent, nearest_hankel

# Problems up to this flattened dimension are solved with a dense symmetric
# eigensolver; larger ones never materialize H and use Lanczos iterations.
DENSE_LIMIT = 400

# Entries of the flattened weight vector smaller than this are treated as
# zero when fixing the overall sign of W.
_SIGN_EPS = 1e-12

# Relative gap below which the top of the spectrum counts as degenerate.
_DEGENERATE_GAP = 1e-10

# Fixed seed for solver start vectors; keeps every fit bit-reproducible.
_START_SEED = 0x5745


@dataclass(eq=False)
class SeriesMatrix:
    """An n x m block of observations: rows are variables, columns are time points.

    values : float matrix, finite, at least one row and two columns
    variable_names : optional list of n row labels
    time_index : optional strictly increasing vector of m time stamps
    """

    values: np.ndarray
    variable_names: list[str] | None = None
    time_index: np.ndarray | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise ShapeError(f"series matrix must be 2-D, got ndim={v.ndim}")
        if v.shape[0] < 1:
            raise InvalidDataError("series matrix needs at least one variable row")
        if v.shape[1] < 2:
            raise InvalidDataError(
                f"series matrix needs at least two time points, got {v.shape[1]}"
            )
        if not np.all(np.isfinite(v)):
            raise InvalidDataError("series matrix contains non-finite entries")
        self.values = v
        if self.variable_names is not None:
            self.variable_names = [str(s) for s in self.variable_names]
            if len(self.variable_names) != v.shape[0]:
                raise ShapeError(
                    f"{len(self.variable_names)} variable names for {v.shape[0]} rows"
                )
        if self.time_index is not None:
            t = np.asarray(self.time_index, dtype=float)
            if t.ndim != 1 or t.size != v.shape[1]:
                raise ShapeError("time index length must equal the number of columns")
            if not np.all(np.isfinite(t)):
                raise InvalidDataError("time index contains non-finite values")
            if np.any(np.diff(t) <= 0):
                raise InvalidDataError("time index must be strictly increasing")
            self.time_index = t

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.values.shape[1]


@dataclass
class EmbeddingConfig:
    """Embedding dimension and objective weight for a fit.

    L : number of delay rows, integer >= 2 (and <= m at fit time)
    lam : weight of the delay-consistency term, in [0, 1]
    center_rows : remove each row's mean before fitting (on by default;
        the objective is derived for centered data)
    scale_rows : additionally divide each non-constant row by its sample
        standard deviation, for data whose variables live on very
        different scales
    """

    L: int
    lam: float
    center_rows: bool = True
    scale_rows: bool = False

    def __post_init__(self):
        if int(self.L) != self.L or self.L < 2:
            raise ParameterError(f"L must be an integer >= 2, got {self.L}")
        self.L = int(self.L)
        if not 0.0 <= self.lam <= 1.0:
            raise ParameterError(f"lam must lie in [0, 1], got {self.lam}")


@dataclass(eq=False)
class GramBlocks:
    """The four n x n Gram matrices of a centered series and its two shifts.

    cxx = X X', cpp = P P', cqq = Q Q', cpq = P Q' where P drops the first
    column of X and Q drops the last.  cxx, cpp and cqq are symmetric
    positive semidefinite; cpq is general.
    """

    cxx: np.ndarray
    cpp: np.ndarray
    cqq: np.ndarray
    cpq: np.ndarray
    n: int
    m: int

    def validate(self, tol: float = 1e-10) -> None:
        """Check symmetry and positive semidefiniteness of the square blocks."""
        for name, c in (("cxx", self.cxx), ("cpp", self.cpp), ("cqq", self.cqq)):
            scale = max(1.0, float(np.max(np.abs(c), initial=0.0)))
            if np.max(np.abs(c - c.T), initial=0.0) > tol * scale:
                raise InvalidDataError(f"gram block {name} is not symmetric")
            w = np.linalg.eigvalsh(c)
            if w[0] < -tol * scale:
                raise InvalidDataError(
                    f"gram block {name} has negative eigenvalue {w[0]:.3e}"
                )


def center_series(x: SeriesMatrix, cfg: EmbeddingConfig) -> SeriesMatrix:
    """Remove each row's mean; optionally rescale rows to unit sample SD.

    Constant rows become all-zero and are never divided by their zero SD.
    Row means of the result are zero to machine precision.
    """
    v = x.values
    centered = v - v.mean(axis=1, keepdims=True)
    if cfg.scale_rows and x.m >= 2:
        sd = centered.std(axis=1, ddof=1)
        safe = np.where(sd > 0.0, sd, 1.0)
        centered = centered / safe[:, None]
    return SeriesMatrix(centered, x.variable_names, x.time_index)


def gram_blocks(xc: SeriesMatrix) -> GramBlocks:
    """Gram matrices of a (centered) series matrix and its one-step shifts.

    Requires m >= 2 so that the shifted slices are non-empty.  The square
    blocks are symmetrized to remove floating-point asymmetry from the
    matrix products.
    """
    v = xc.values
    if v.shape[1] < 2:
        raise InvalidDataError("need at least two columns to form shifted blocks")
    p = v[:, 1:]
    q = v[:, :-1]
    cxx = v @ v.T
    cpp = p @ p.T
    cqq = q @ q.T
    cpq = p @ q.T
    return GramBlocks(
        cxx=(cxx + cxx.T) / 2.0,
        cpp=(cpp + cpp.T) / 2.0,
        cqq=(cqq + cqq.T) / 2.0,
        cpq=cpq,
        n=v.shape[0],
        m=v.shape[1],
    )


@dataclass(eq=False)
class BlockTridiagOperator:
    """Matrix-free representation of the symmetric block-tridiagonal H.

    Holds the Gram blocks plus (lam, L) and applies H to flattened weight
    vectors in O(L n^2) without assembling the nL x nL matrix.
    """

    blocks: GramBlocks
    lam: float
    L: int
    _d_first: np.ndarray = field(init=False, repr=False)
    _d_mid: np.ndarray = field(init=False, repr=False)
    _d_last: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if int(self.L) != self.L or self.L < 2:
            raise ParameterError(f"L must be an integer >= 2, got {self.L}")
        self.L = int(self.L)
        if not 0.0 <= self.lam <= 1.0:
            raise ParameterError(f"lam must lie in [0, 1], got {self.lam}")
        b = self.blocks
        lam = self.lam
        base = (1.0 - lam) * b.cxx
        self._d_first = base - lam * b.cpp
        self._d_mid = base - lam * (b.cpp + b.cqq)
        self._d_last = base - lam * b.cqq

    @property
    def n(self) -> int:
        return self.blocks.n

    @property
    def dim(self) -> int:
        return self.L * self.n

    def diagonal_block(self, i: int):
        """The i-th (0-based) n x n diagonal block of H."""
        if not 0 <= i < self.L:
            raise ParameterError(f"block index {i} out of range for L={self.L}")
        if i == 0:
            return self._d_first
        if i == self.L - 1:
            return self._d_last
        return self._d_mid

    def matvec(self, v):
        """Apply H to a flattened L*n vector.

        Works row-block-wise: with V the L x n reshaping of v, the result
        rows are D_i v_i + lam Cpq v_{i+1} + lam Cpq' v_{i-1} (terms present
        where the neighbour exists).
        """
        v = np.asarray(v, dtype=float)
        flat = v.ndim == 1
        if flat:
            if v.shape != (self.dim,):
                raise ShapeError(f"expected vector of length {self.dim}, got {v.shape}")
            vm = v.reshape(self.L, self.n)
        else:
            raise ShapeError("matvec takes a 1-D vector")
        b = self.blocks
        lam = self.lam
        out = (1.0 - lam) * (vm @ b.cxx)
        if lam != 0.0:
            out[:-1] -= lam * (vm[:-1] @ b.cpp)
            out[1:] -= lam * (vm[1:] @ b.cqq)
            # super-diagonal: lam Cpq applied to the next block, row form
            out[:-1] += lam * (vm[1:] @ b.cpq.T)
            # sub-diagonal: lam Cpq' applied to the previous block, row form
            out[1:] += lam * (vm[:-1] @ b.cpq)
        return out.ravel()

    def to_dense(self, limit: int = DENSE_LIMIT):
        """Assemble H explicitly; refused above `limit` to keep memory bounded."""
        if self.dim > limit:
            raise ParameterError(
                f"refusing to assemble a {self.dim} x {self.dim} dense matrix "
                f"(limit {limit})"
            )
        n, L = self.n, self.L
        h = np.zeros((self.dim, self.dim))
        s = self.lam * self.blocks.cpq
        for i in range(L):
            sl = slice(i * n, (i + 1) * n)
            h[sl, sl] = self.diagonal_block(i)
            if i + 1 < L:
                nx = slice((i + 1) * n, (i + 2) * n)
                h[sl, nx] = s
                h[nx, sl] = s.T
        return h

    def norm_bound(self) -> float:
        """Upper bound on the spectral norm via block-row norms.

        max_i ||D_i||_2 + 2 lam ||Cpq||_2 bounds every block Gershgorin row
        sum, so H + bound*I is positive semidefinite.
        """
        d_norms = [np.linalg.norm(self._d_first, 2), np.linalg.norm(self._d_last, 2)]
        if self.L > 2:
            d_norms.append(np.linalg.norm(self._d_mid, 2))
        off = self.lam * np.linalg.norm(self.blocks.cpq, 2)
        return float(max(d_norms) + 2.0 * off)


def h_matvec(op: BlockTridiagOperator, v):
    """Apply the block-tridiagonal operator to a flattened weight vector."""
    return op.matvec(v)


@dataclass(eq=False)
class EigenPair:
    """Dominant eigenpair plus solver diagnostics.

    iterations counts operator applications (0 for the dense path);
    degenerate is set when the solver saw a top-of-spectrum gap below
    1e-10 relative, in which case the eigenvector is one valid choice
    among many.
    """

    alpha: float
    vector: np.ndarray
    iterations: int
    degenerate: bool = False


def _start_vector(dim: int):
    rng = np.random.default_rng(_START_SEED)
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def _power_iterate(op, v, tol, max_iter, degenerate=False):
    """Shifted power iteration on H + s I from a given unit start vector.

    The block-Gershgorin shift s makes the dominant algebraic eigenvalue of
    H the dominant eigenvalue in magnitude.  Stops on the residual test
    ||H v - alpha v|| <= tol * max(1, |alpha|).
    """
    s = op.norm_bound()
    residual = np.inf
    alpha = 0.0
    for it in range(1, max_iter + 1):
        hv = op.matvec(v)
        alpha = float(v @ hv)
        residual = float(np.linalg.norm(hv - alpha * v))
        if residual <= tol * max(1.0, abs(alpha)):
            return EigenPair(alpha, v, it, degenerate)
        w = hv + s * v
        norm_w = np.linalg.norm(w)
        if norm_w == 0.0:
            # v is an exact eigenvector of eigenvalue -s; restart randomly
            v = _start_vector(op.dim)
            continue
        v = w / norm_w
    raise ConvergenceError(
        f"power iteration did not reach tol={tol} after {max_iter} iterations "
        f"(last residual {residual:.3e})",
        residual=residual,
    )


def _power_iteration(op, tol, max_iter):
    return _power_iterate(op, _start_vector(op.dim), tol, max_iter)


def _lanczos(op, tol, max_iter):
    """Dominant algebraic eigenpair via ARPACK on the matrix-free operator.

    Asks for the top two eigenvalues so the degeneracy flag can be set.  A
    numerically multiple top eigenvalue can stall the two-pair run (one
    Krylov vector cannot resolve multiplicity), so on non-convergence the
    solve is retried for a single pair and flagged as degenerate.
    """
    dim = op.dim
    calls = 0

    def mv(x):
        nonlocal calls
        calls += 1
        return op.matvec(np.asarray(x, dtype=float).ravel())

    lin = scipy.sparse.linalg.LinearOperator((dim, dim), matvec=mv, dtype=float)
    v0 = _start_vector(dim)
    arpack_tol = tol * 1e-2
    vals = vecs = None
    degenerate = False
    if dim >= 3:
        try:
            vals, vecs = scipy.sparse.linalg.eigsh(
                lin, k=2, which="LA", v0=v0,
                ncv=min(dim, 40), maxiter=max_iter, tol=arpack_tol,
            )
        except scipy.sparse.linalg.ArpackNoConvergence:
            vals = None
    if vals is None:
        try:
            vals, vecs = scipy.sparse.linalg.eigsh(
                lin, k=1, which="LA", v0=v0,
                ncv=min(dim, 40), maxiter=max_iter, tol=arpack_tol,
            )
            degenerate = dim >= 3
        except scipy.sparse.linalg.ArpackNoConvergence:
            return _power_iteration(op, tol, max_iter)
    top = int(np.argmax(vals))
    alpha = float(vals[top])
    vec = vecs[:, top]
    vec = vec / np.linalg.norm(vec)
    if vals.size == 2:
        gap = abs(alpha - float(vals[1 - top]))
        degenerate = gap < _DEGENERATE_GAP * max(1.0, abs(alpha))
    residual = float(np.linalg.norm(op.matvec(vec) - alpha * vec))
    if residual > tol * max(1.0, abs(alpha)):
        # ARPACK met its own stopping rule but not the residual contract
        # (its tolerance is relative to the operator scale, the contract
        # is relative to |alpha|).  Polishing the Ritz vector with shifted
        # power steps removes the leftover contamination quickly.
        refined = _power_iterate(op, vec, tol, max_iter, degenerate)
        return EigenPair(refined.alpha, refined.vector,
                         calls + refined.iterations, degenerate)
    return EigenPair(alpha, vec, calls, degenerate)


def dominant_eigenpair(
    op: BlockTridiagOperator,
    tol: float = 1e-10,
    max_iter: int = 10000,
    method: str = "auto",
) -> EigenPair:
    """Largest algebraic eigenvalue of H and a unit eigenvector.

    Parameters
    ----------
    op : the block-tridiagonal operator
    tol : residual tolerance; the returned pair satisfies
        ||H v - alpha v||_2 <= tol * max(1, |alpha|)
    max_iter : iteration cap for the iterative methods
    method : "auto" (dense up to DENSE_LIMIT, Lanczos above), or one of
        "dense", "lanczos", "power"

    Results are deterministic: iterative starts use a fixed seeded vector.
    Raises ConvergenceError when an iterative method runs out of iterations.
    """
    if tol <= 0:
        raise ParameterError(f"tol must be positive, got {tol}")
    if max_iter < 1:
        raise ParameterError(f"max_iter must be >= 1, got {max_iter}")
    if method == "auto":
        method = "dense" if op.dim <= DENSE_LIMIT else "lanczos"
    # all-zero data gives H = 0; every unit vector is an eigenvector of 0
    if not op.blocks.cxx.any():
        e1 = np.zeros(op.dim)
        e1[0] = 1.0
        return EigenPair(0.0, e1, 0, degenerate=op.dim > 1)
    if method == "dense":
        h = op.to_dense()
        w, vecs = np.linalg.eigh(h)
        alpha = float(w[-1])
        vec = vecs[:, -1]
        degenerate = w.size >= 2 and (
            (w[-1] - w[-2]) < _DEGENERATE_GAP * max(1.0, abs(alpha))
        )
        return EigenPair(alpha, vec, 0, degenerate)
    if method == "lanczos":
        return _lanczos(op, tol, max_iter)
    if method == "power":
        return _power_iteration(op, tol, max_iter)
    raise ParameterError(f"unknown method {method!r}")


@dataclass(eq=False)
class StpcaResult:
    """Everything a fit produces.

    w : L x n weight matrix, unit Frobenius norm; the first entry of the
        row-wise flattening larger than 1e-12 in magnitude is positive
    alpha : dominant eigenvalue; the attained objective equals -alpha
    z : L x m projection w @ X_centered, approximately Hankel
    z_extended : latent series of length m + L - 1, the anti-diagonal
        means of z
    embedding_error : Frobenius distance from z to its nearest Hankel
        matrix; values below roughly 2 indicate a usable embedding
    iterations : operator applications spent by the eigensolver
    converged : always True for a returned result (failures raise)
    degenerate : top of the spectrum was numerically degenerate, so w is
        one valid optimum among many
    """

    w: np.ndarray
    alpha: float
    z: np.ndarray
    z_extended: np.ndarray
    embedding_error: float
    iterations: int
    converged: bool
    degenerate: bool = False


def _fix_sign(w):
    flat = w.ravel()
    idx = np.flatnonzero(np.abs(flat) > _SIGN_EPS)
    if idx.size and flat[idx[0]] < 0.0:
        return -w
    return w


def embedding_error(z_matrix) -> float:
    """Frobenius distance from a matrix to its nearest Hankel matrix.

    Zero exactly when the matrix is Hankel, i.e. the projection rows are
    perfectly delay-consistent.
    """
    z = np.asarray(z_matrix, dtype=float)
    return float(np.linalg.norm(z - nearest_hankel(z)))


def fit_stpca(
    x: SeriesMatrix,
    cfg: EmbeddingConfig,
    *,
    tol: float = 1e-10,
    max_iter: int = 10000,
    method: str = "auto",
) -> StpcaResult:
    """Fit stPCA: center, build Gram blocks, solve for the dominant eigenpair.

    Parameters
    ----------
    x : input series, n variables by m time points (m >= L)
    cfg : embedding dimension L and weight lam, plus centering flags
    tol, max_iter, method : passed to dominant_eigenpair

    Returns an StpcaResult.  The weight matrix w realizes the constrained
    minimum of the stPCA objective, whose value is -alpha; z_extended is
    the one-dimensional latent read-out.
    """
    if cfg.L > x.m:
        raise ParameterError(f"L={cfg.L} exceeds the number of time points m={x.m}")
    xc = center_series(x, cfg) if cfg.center_rows else x
    blocks = gram_blocks(xc)
    op = BlockTridiagOperator(blocks, cfg.lam, cfg.L)
    pair = dominant_eigenpair(op, tol=tol, max_iter=max_iter, method=method)
    w = _fix_sign(pair.vector.reshape(cfg.L, x.n).copy())
    z = w @ xc.values
    return StpcaResult(
        w=w,
        alpha=pair.alpha,
        z=z,
        z_extended=extract_latent(z),
        embedding_error=embedding_error(z),
        iterations=pair.iterations,
        converged=True,
        degenerate=pair.degenerate,
    )


def objective_value(w, x: SeriesMatrix, lam: float) -> float:
    """Evaluate the stPCA objective for a given unit-Frobenius weight matrix.

    Rows of x are mean-centered first, mirroring what fit_stpca optimizes
    under its default preprocessing, so for the w returned by such a fit
    the value equals -alpha.  Pass an already rescaled matrix to compare
    against a fit that used row scaling.
    """
    w = np.asarray(w, dtype=float)
    if w.ndim != 2:
        raise ShapeError(f"w must be 2-D, got ndim={w.ndim}")
    if w.shape[0] < 2:
        raise ShapeError("w needs at least two rows")
    if w.shape[1] != x.n:
        raise ShapeError(f"w has {w.shape[1]} columns but x has {x.n} variables")
    if not 0.0 <= lam <= 1.0:
        raise ParameterError(f"lam must lie in [0, 1], got {lam}")
    norm = np.linalg.norm(w)
    if abs(norm - 1.0) > 1e-8:
        raise ParameterError(f"w must have unit Frobenius norm, got {norm!r}")
    v = x.values - x.values.mean(axis=1, keepdims=True)
    proj = w @ v
    var_term = float(np.sum(proj * proj))
    mismatch = w[:-1] @ v[:, 1:] - w[1:] @ v[:, :-1]
    delay_term = float(np.sum(mismatch * mismatch))
    return -(1.0 - lam) * var_term + lam * delay_term
