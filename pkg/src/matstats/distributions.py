"""Log-densities, latent posteriors, and samplers for the four model families.

Families
--------
* multivariate t: a d-vector whose squared Mahalanobis form enters a
  polynomial tail; scale-mixture representation with a Gamma latent
  weight.
* matrix-normal: a c-by-r matrix with separable (Kronecker) covariance;
  the row-major vectorization is Gaussian with covariance
  ``kron(col_cov, row_cov)``.
* matrix-variate t (lowercase t): the row-major vectorization follows a
  multivariate t with separable scale; Gamma scale mixture of the
  matrix-normal.
* matrix-variate T (uppercase T): a Wishart mixture of the matrix-normal
  on the column side; a genuinely different family, not vec-equivalent
  to the multivariate t.

All densities include their normalizing constants so log-likelihoods are
comparable across families.  Samplers take an explicit seed or
``numpy.random.Generator``; the generator is numpy's default PCG64, so a
fixed 64-bit seed reproduces streams bit-for-bit across platforms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .data import Dataset
from .errors import DimensionError, DomainError
from .specfun import (
    SpdMatrix,
    as_spd,
    log_multivariate_gamma,
    multivariate_digamma,
    right_whiten,
    tri_solve_left,
    whiten,
)

__all__ = [
    "MultivariateTParams",
    "MatrixNormalParams",
    "MatrixTParams",
    "MatrixTTParams",
    "GammaPosterior",
    "WishartPosterior",
    "mvt_logpdf",
    "matrix_normal_logpdf",
    "matrix_t_logpdf",
    "matrix_T_logpdf",
    "mvt_posterior_weight",
    "matrix_t_posterior_weight",
    "matrix_T_posterior",
    "sample",
]


# ---------------------------------------------------------------------------
# Parameter bundles


@dataclass(frozen=True)
class MultivariateTParams:
    """Center, scale matrix, and degrees of freedom of a multivariate t."""

    mean: np.ndarray
    scale: SpdMatrix
    dof: float

    def __post_init__(self):
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=float).reshape(-1))
        object.__setattr__(self, "scale", as_spd(self.scale))
        if self.scale.dim != self.mean.shape[0]:
            raise DimensionError(f"scale is {self.scale.dim}-dimensional but the center has length {self.mean.shape[0]}")
        if not self.dof > 0:
            raise DomainError(f"degrees of freedom must be positive, got {self.dof}")

    @property
    def d(self) -> int:
        return self.mean.shape[0]


class _MatrixParamsBase:
    def _init_matrix(self, dof_required: bool):
        object.__setattr__(self, "mean", np.atleast_2d(np.asarray(self.mean, dtype=float)))
        object.__setattr__(self, "col_cov", as_spd(self.col_cov))
        object.__setattr__(self, "row_cov", as_spd(self.row_cov))
        c, r = self.mean.shape
        if self.col_cov.dim != c or self.row_cov.dim != r:
            raise DimensionError(
                f"mean is {c}x{r} but covariance factors are "
                f"{self.col_cov.dim}x{self.col_cov.dim} and {self.row_cov.dim}x{self.row_cov.dim}"
            )
        if dof_required and not self.dof > 0:
            raise DomainError(f"degrees of freedom must be positive, got {self.dof}")

    @property
    def c(self) -> int:
        return self.mean.shape[0]

    @property
    def r(self) -> int:
        return self.mean.shape[1]


@dataclass(frozen=True)
class MatrixNormalParams(_MatrixParamsBase):
    """Mean matrix and the column/row covariance factors."""

    mean: np.ndarray
    col_cov: SpdMatrix
    row_cov: SpdMatrix

    def __post_init__(self):
        self._init_matrix(dof_required=False)


@dataclass(frozen=True)
class MatrixTParams(_MatrixParamsBase):
    """Matrix-variate t (lowercase): mean, scale factors, degrees of freedom."""

    mean: np.ndarray
    col_cov: SpdMatrix
    row_cov: SpdMatrix
    dof: float

    def __post_init__(self):
        self._init_matrix(dof_required=True)


@dataclass(frozen=True)
class MatrixTTParams(_MatrixParamsBase):
    """Matrix-variate T (uppercase, Wishart-mixed): center, factors, dof."""

    mean: np.ndarray
    col_cov: SpdMatrix
    row_cov: SpdMatrix
    dof: float

    def __post_init__(self):
        self._init_matrix(dof_required=True)


# ---------------------------------------------------------------------------
# Latent posteriors


@dataclass(frozen=True)
class GammaPosterior:
    """Gamma posterior of a latent scale weight (rate parametrization)."""

    alpha: np.ndarray
    beta: np.ndarray

    @property
    def mean(self):
        return self.alpha / self.beta

    @property
    def mean_log(self):
        from .specfun import digamma

        a = np.asarray(self.alpha, dtype=float)
        b = np.asarray(self.beta, dtype=float)
        dg = np.vectorize(digamma)(a) if a.ndim else digamma(float(a))
        return dg - np.log(b)


@dataclass(frozen=True)
class WishartPosterior:
    """Wishart posterior of a latent precision matrix."""

    scale: np.ndarray
    dof: float

    @property
    def mean(self):
        return self.dof * self.scale

    @property
    def mean_logdet(self):
        d = self.scale.shape[-1]
        _, ld = np.linalg.slogdet(self.scale)
        return multivariate_digamma(0.5 * self.dof, d) + d * math.log(2.0) + ld


# ---------------------------------------------------------------------------
# Log-densities


def _check_vectors(x, p: MultivariateTParams) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[-1] != p.d:
        raise DimensionError(f"observations have dimension {x.shape[-1]}, parameters expect {p.d}")
    return x, single


def _check_matrices(x, p) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 2
    if single:
        x = x[None]
    if x.ndim != 3 or x.shape[-2:] != (p.c, p.r):
        raise DimensionError(f"observations have shape {x.shape[-2:]}, parameters expect ({p.c}, {p.r})")
    return x, single


def _mahalanobis_sq(x: np.ndarray, p: MultivariateTParams) -> np.ndarray:
    z = tri_solve_left(p.scale.chol, (x - p.mean).T)
    return np.sum(z * z, axis=0)


def _kron_delta(x: np.ndarray, p) -> np.ndarray:
    """Separable quadratic form tr{Sc^{-1} (X-M) Sr^{-1} (X-M)'} per observation."""
    z = whiten(x - p.mean, p.col_cov.chol, p.row_cov.chol)
    return np.sum(z * z, axis=(-2, -1))


def mvt_logpdf(x, p: MultivariateTParams):
    """Multivariate t log-density; accepts a single vector or an (n, d) stack."""
    x, single = _check_vectors(x, p)
    d, nu = p.d, p.dof
    m = _mahalanobis_sq(x, p)
    out = (
        gammaln(0.5 * (nu + d))
        - gammaln(0.5 * nu)
        - 0.5 * d * math.log(nu * math.pi)
        - 0.5 * p.scale.logdet
        - 0.5 * (nu + d) * np.log1p(m / nu)
    )
    return float(out[0]) if single else out


def matrix_normal_logpdf(x, p: MatrixNormalParams):
    """Matrix-normal log-density; accepts one matrix or an (n, c, r) stack."""
    x, single = _check_matrices(x, p)
    c, r = p.c, p.r
    delta = _kron_delta(x, p)
    out = (
        -0.5 * c * r * math.log(2.0 * math.pi)
        - 0.5 * r * p.col_cov.logdet
        - 0.5 * c * p.row_cov.logdet
        - 0.5 * delta
    )
    return float(out[0]) if single else out


def matrix_t_logpdf(x, p: MatrixTParams):
    """Matrix-variate t log-density with full normalizing constants."""
    x, single = _check_matrices(x, p)
    c, r, nu = p.c, p.r, p.dof
    delta = _kron_delta(x, p)
    out = (
        gammaln(0.5 * (nu + c * r))
        - gammaln(0.5 * nu)
        - 0.5 * c * r * math.log(nu * math.pi)
        - 0.5 * r * p.col_cov.logdet
        - 0.5 * c * p.row_cov.logdet
        - 0.5 * (nu + c * r) * np.log1p(delta / nu)
    )
    return float(out[0]) if single else out


def matrix_T_logpdf(x, p: MatrixTTParams):
    """Matrix-variate T log-density.

    The determinant kernel |I + Sc^{-1}(X-M) Sr^{-1} (X-M)'| carries the
    exponent -(nu+c+r-1)/2; only the negative sign yields a normalizable
    density, so that is what is implemented (and what the Wishart-mixture
    construction integrates to).
    """
    x, single = _check_matrices(x, p)
    c, r, nu = p.c, p.r, p.dof
    g = right_whiten(x - p.mean, p.row_cov.chol)
    w = g @ np.swapaxes(g, -1, -2) + p.col_cov.values
    _, ld_w = np.linalg.slogdet(w)
    ld_c = p.col_cov.logdet
    out = (
        log_multivariate_gamma(0.5 * (nu + c + r - 1), c)
        - log_multivariate_gamma(0.5 * (nu + c - 1), c)
        - 0.5 * c * r * math.log(math.pi)
        - 0.5 * r * ld_c
        - 0.5 * c * p.row_cov.logdet
        - 0.5 * (nu + c + r - 1) * (ld_w - ld_c)
    )
    return float(out[0]) if single else out


# ---------------------------------------------------------------------------
# Posteriors of the latent variables


def mvt_posterior_weight(x, p: MultivariateTParams) -> GammaPosterior:
    """Posterior of the latent Gamma weight given an observation."""
    x, single = _check_vectors(x, p)
    m = _mahalanobis_sq(x, p)
    alpha = 0.5 * (p.dof + p.d)
    beta = 0.5 * (p.dof + m)
    if single:
        return GammaPosterior(alpha=float(alpha), beta=float(beta[0]))
    return GammaPosterior(alpha=np.full(m.shape, alpha), beta=beta)


def matrix_t_posterior_weight(x, p: MatrixTParams) -> GammaPosterior:
    """Posterior of the latent weight for the matrix-variate t."""
    x, single = _check_matrices(x, p)
    delta = _kron_delta(x, p)
    alpha = 0.5 * (p.dof + p.c * p.r)
    beta = 0.5 * (p.dof + delta)
    if single:
        return GammaPosterior(alpha=float(alpha), beta=float(beta[0]))
    return GammaPosterior(alpha=np.full(delta.shape, alpha), beta=beta)


def matrix_T_posterior(x, p: MatrixTTParams) -> WishartPosterior:
    """Posterior of the latent column precision for the matrix-variate T."""
    x, single = _check_matrices(x, p)
    g = right_whiten(x - p.mean, p.row_cov.chol)
    w = g @ np.swapaxes(g, -1, -2) + p.col_cov.values
    scale = np.linalg.inv(w)
    scale = 0.5 * (scale + np.swapaxes(scale, -1, -2))
    if single:
        scale = scale[0]
    return WishartPosterior(scale=scale, dof=p.dof + p.c + p.r - 1)


# ---------------------------------------------------------------------------
# Samplers


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def _sample_matrix_normal_core(p, n: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal((n, p.c, p.r))
    return p.mean + p.col_cov.chol @ z @ p.row_cov.chol.T


def _bartlett_wishart_factors(scale_chol_like: np.ndarray, dof: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """Factors F_i with F_i F_i' ~ W(scale, dof), scale given via any square root."""
    d = scale_chol_like.shape[0]
    a = np.zeros((n, d, d))
    df = dof - np.arange(d)
    ii = np.arange(d)
    a[:, ii, ii] = np.sqrt(rng.chisquare(df, size=(n, d)))
    lower = np.tril_indices(d, -1)
    if lower[0].size:
        a[:, lower[0], lower[1]] = rng.standard_normal((n, lower[0].size))
    return scale_chol_like @ a


def sample(p, n: int, rng) -> Dataset:
    """Draw ``n`` observations from any of the four parameter bundles.

    ``rng`` is a 64-bit seed or a ``numpy.random.Generator`` (PCG64 when
    seeded here); identical seeds give identical sample streams.
    Multivariate-t draws are returned as 1-by-d row observations.
    """
    if n < 1:
        raise DomainError(f"sample size must be at least 1, got {n}")
    gen = _as_generator(rng)
    if isinstance(p, MultivariateTParams):
        tau = gen.gamma(shape=0.5 * p.dof, scale=2.0 / p.dof, size=n)
        z = gen.standard_normal((n, p.d))
        x = p.mean + (z @ p.scale.chol.T) / np.sqrt(tau)[:, None]
        return Dataset(x[:, None, :])
    if isinstance(p, MatrixNormalParams):
        return Dataset(_sample_matrix_normal_core(p, n, gen))
    if isinstance(p, MatrixTParams):
        tau = gen.gamma(shape=0.5 * p.dof, scale=2.0 / p.dof, size=n)
        x = p.mean + _sample_matrix_normal_core(MatrixNormalParams(np.zeros((p.c, p.r)), p.col_cov, p.row_cov), n, gen) / np.sqrt(tau)[:, None, None]
        return Dataset(x)
    if isinstance(p, MatrixTTParams):
        # Latent S ~ W_c(col_cov^{-1}, dof+c-1); X | S is matrix-normal with
        # column covariance S^{-1}.  Any square root of S^{-1} works below.
        inv_root = np.linalg.inv(p.col_cov.chol).T  # upper, times own transpose = col_cov^{-1}
        b = _bartlett_wishart_factors(inv_root, p.dof + p.c - 1, n, gen)
        f = np.swapaxes(np.linalg.inv(b), -1, -2)  # F F' = (B B')^{-1} = S^{-1}
        z = gen.standard_normal((n, p.c, p.r))
        return Dataset(p.mean + f @ z @ p.row_cov.chol.T)
    raise DomainError(f"cannot sample from parameters of type {type(p).__name__}")
