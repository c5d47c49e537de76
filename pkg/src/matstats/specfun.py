"""Scalar special functions and dense SPD kernels shared by all estimators.

Everything here is a pure function of its inputs; :class:`SpdMatrix` and
:class:`EigenSystem` are immutable after construction and safe to share
across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.linalg.lapack import dpotrf

from .errors import DimensionError, DomainError, NotPositiveDefiniteError

__all__ = [
    "SpdMatrix",
    "EigenSystem",
    "digamma",
    "multivariate_digamma",
    "log_multivariate_gamma",
    "gamma_moments",
    "wishart_moments",
    "spd_solve_logdet",
    "sym_eigen",
    "chol_lower",
    "tri_solve_left",
    "right_whiten",
    "whiten",
]

# Relative asymmetry below this is treated as floating-point drift and
# symmetrized away; anything larger is a hard error.
SYM_TOL = 1e-12

# Coefficients of x^{-2n} in the asymptotic tail of psi(x), i.e.
# -B_{2n}/(2n) for n = 1..7.  With the recurrence shift to x >= 6 the
# truncation error stays below 1e-12.
_PSI_TAIL = (
    -1.0 / 12.0,
    1.0 / 120.0,
    -1.0 / 252.0,
    1.0 / 240.0,
    -1.0 / 132.0,
    691.0 / 32760.0,
    -1.0 / 12.0,
)


def digamma(x: float) -> float:
    """Digamma function psi(x) = d ln Gamma(x) / dx for x > 0.

    Uses the ascending recurrence psi(x) = psi(x+1) - 1/x to shift the
    argument above 6, then the Bernoulli asymptotic expansion.  Absolute
    accuracy is better than 1e-12 for x >= 1e-3.
    """
    x = float(x)
    if not x > 0.0:
        raise DomainError(f"digamma requires x > 0, got {x}")
    acc = 0.0
    while x < 6.0:
        acc -= 1.0 / x
        x += 1.0
    z = 1.0 / (x * x)
    tail = 0.0
    for c in reversed(_PSI_TAIL):
        tail = (tail + c) * z
    return acc + math.log(x) - 0.5 / x + tail


def multivariate_digamma(x: float, d: int) -> float:
    """d-variate digamma psi_d(x) = sum_{i=1..d} psi(x + (1-i)/2).

    Defined for x > (d-1)/2; it is the derivative of
    :func:`log_multivariate_gamma` in x.
    """
    d = _check_order(d)
    x = float(x)
    if not x > 0.5 * (d - 1):
        raise DomainError(f"multivariate digamma requires x > (d-1)/2 = {0.5 * (d - 1)}, got {x}")
    return sum(digamma(x + 0.5 * (1 - i)) for i in range(1, d + 1))


def log_multivariate_gamma(x: float, d: int) -> float:
    """ln Gamma_d(x) = (d(d-1)/4) ln pi + sum_{i=1..d} ln Gamma(x + (1-i)/2)."""
    d = _check_order(d)
    x = float(x)
    if not x > 0.5 * (d - 1):
        raise DomainError(f"log multivariate gamma requires x > (d-1)/2 = {0.5 * (d - 1)}, got {x}")
    out = 0.25 * d * (d - 1) * math.log(math.pi)
    return out + sum(math.lgamma(x + 0.5 * (1 - i)) for i in range(1, d + 1))


def gamma_moments(alpha: float, beta: float) -> tuple[float, float]:
    """Mean and log-mean of Gam(alpha, beta) with rate parametrization.

    Returns ``(alpha / beta, psi(alpha) - ln beta)``.
    """
    if not (alpha > 0 and beta > 0):
        raise DomainError(f"gamma moments require alpha, beta > 0, got ({alpha}, {beta})")
    return alpha / beta, digamma(alpha) - math.log(beta)


def wishart_moments(scale, dof: float) -> tuple[np.ndarray, float]:
    """Mean and expected log-determinant of a Wishart matrix.

    For S ~ W_d(scale, dof): E[S] = dof * scale and
    E[ln|S|] = psi_d(dof/2) + d ln 2 + ln|scale|.
    """
    psi = as_spd(scale)
    d = psi.dim
    if not dof > d - 1:
        raise DomainError(f"Wishart degrees of freedom must exceed dim - 1 = {d - 1}, got {dof}")
    mean_logdet = multivariate_digamma(0.5 * dof, d) + d * math.log(2.0) + psi.logdet
    return dof * psi.values, mean_logdet


def _check_order(d) -> int:
    if int(d) != d or d < 1:
        raise DomainError(f"order d must be a positive integer, got {d}")
    return int(d)


class SpdMatrix:
    """A symmetric positive definite matrix with a cached Cholesky factor.

    Construction symmetrizes floating-point drift up to a relative
    asymmetry of ``SYM_TOL`` and proves positive definiteness by a
    Cholesky factorization; failures raise
    :class:`~matstats.errors.NotPositiveDefiniteError` carrying the
    offending pivot.  ``jitter=True`` adds ``1e-10 * tr(A)/dim`` to the
    diagonal first, which estimator loops use to absorb accumulated
    round-off near singularity.
    """

    __slots__ = ("values", "chol")

    def __init__(self, values, jitter: bool = False):
        a = np.array(values, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionError(f"SPD matrix must be square, got shape {a.shape}")
        scale = np.linalg.norm(a)
        asym = np.linalg.norm(a - a.T)
        if asym > SYM_TOL * max(scale, 1e-300):
            raise DomainError(f"matrix is asymmetric (relative asymmetry {asym / scale:.3e})")
        a = 0.5 * (a + a.T)
        if jitter:
            a[np.diag_indices_from(a)] += 1e-10 * np.trace(a) / a.shape[0]
        self.values = a
        self.chol = chol_lower(a)
        self.values.setflags(write=False)
        self.chol.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    @property
    def logdet(self) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self.chol))))

    def solve(self, b: np.ndarray) -> np.ndarray:
        """Solve A x = b via the cached Cholesky factor."""
        return cho_solve((self.chol, True), np.asarray(b, dtype=float), check_finite=False)

    @property
    def inverse(self) -> np.ndarray:
        return self.solve(np.eye(self.dim))

    def __repr__(self) -> str:  # pragma: no cover
        return f"SpdMatrix(dim={self.dim})"


def as_spd(a, jitter: bool = False) -> SpdMatrix:
    """Coerce an array (or pass through an :class:`SpdMatrix`)."""
    if isinstance(a, SpdMatrix):
        return a
    return SpdMatrix(a, jitter=jitter)


def chol_lower(a: np.ndarray, jitter: bool = False) -> np.ndarray:
    """Lower Cholesky factor of a symmetric matrix.

    Raises :class:`NotPositiveDefiniteError` with the 1-based pivot index
    on failure.
    """
    a = np.asarray(a, dtype=float)
    if jitter:
        a = a + (1e-10 * np.trace(a) / a.shape[0]) * np.eye(a.shape[0])
    c, info = dpotrf(a, lower=1, clean=1)
    if info != 0:
        raise NotPositiveDefiniteError(pivot=info)
    return c


@dataclass(frozen=True)
class EigenSystem:
    """Descending eigenpairs of a symmetric matrix.

    ``values`` is sorted non-increasing; ``vectors`` holds the matching
    orthonormal columns with the deterministic sign convention that each
    column's largest-magnitude entry is positive.
    """

    values: np.ndarray
    vectors: np.ndarray


def spd_solve_logdet(a, b: np.ndarray) -> tuple[np.ndarray, float]:
    """Solve A X = B for SPD A and return (X, ln|A|).

    Cholesky-based throughout; the explicit inverse is never formed.
    """
    spd = as_spd(a)
    b = np.asarray(b, dtype=float)
    if b.shape[0] != spd.dim:
        raise DimensionError(f"right-hand side has {b.shape[0]} rows, expected {spd.dim}")
    return spd.solve(b), spd.logdet


def sym_eigen(a) -> EigenSystem:
    """Eigendecomposition of a symmetric matrix with deterministic ordering.

    Eigenvalues are returned in descending order; exact ties keep the
    ascending-index order produced by the underlying factorization, and
    each eigenvector is sign-fixed so its largest-magnitude entry is
    positive, making projections reproducible across runs and platforms.
    """
    if isinstance(a, SpdMatrix):
        a = a.values
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {a.shape}")
    scale = np.linalg.norm(a)
    if np.linalg.norm(a - a.T) > SYM_TOL * max(scale, 1e-300):
        raise DomainError("matrix is not symmetric")
    w, v = np.linalg.eigh(0.5 * (a + a.T))
    order = np.argsort(-w, kind="stable")
    w = w[order]
    v = v[:, order]
    lead = np.abs(v).argmax(axis=0)
    signs = np.sign(v[lead, np.arange(v.shape[1])])
    signs[signs == 0] = 1.0
    v = v * signs
    w.setflags(write=False)
    v.setflags(write=False)
    return EigenSystem(values=w, vectors=v)


def tri_solve_left(chol: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve L x = b for a lower-triangular L against stacked matrices.

    ``b`` may have shape (k, m) or (..., k, m); leading axes are batched.
    """
    b = np.asarray(b, dtype=float)
    if b.ndim == 2:
        return solve_triangular(chol, b, lower=True, check_finite=False)
    k = chol.shape[0]
    lead = b.shape[:-2]
    m = b.shape[-1]
    flat = np.moveaxis(b, -2, 0).reshape(k, -1)
    x = solve_triangular(chol, flat, lower=True, check_finite=False)
    return np.moveaxis(x.reshape((k,) + lead + (m,)), 0, -2)


def right_whiten(r: np.ndarray, row_chol: np.ndarray) -> np.ndarray:
    """Compute R L_r^{-T} for stacked matrices R of shape (..., c, r)."""
    rt = np.swapaxes(np.asarray(r, dtype=float), -1, -2)
    return np.swapaxes(tri_solve_left(row_chol, rt), -1, -2)


def whiten(r: np.ndarray, col_chol: np.ndarray, row_chol: np.ndarray) -> np.ndarray:
    """Two-sided whitening L_c^{-1} R L_r^{-T}.

    The squared Frobenius norm of the result is the separable quadratic
    form tr{Sigma_c^{-1} R Sigma_r^{-1} R'}.
    """
    return tri_solve_left(col_chol, right_whiten(r, row_chol))
