"""PCA variants built from fitted or sample covariance structure.

Vector methods (PCA, tPCA) eigendecompose one d-by-d covariance; matrix
methods (FPCA, BPCA, TPCA, RFPCA) eigendecompose the two Kronecker
factors separately.  ``estimate_covariance`` runs the estimator that
feeds each method's factors, ``build_*`` turn covariances into
projection models, and ``implied_covariance`` assembles each method's
full covariance estimate for the robustness metric (dense, so its size
is capped).

Vectorization is row-major throughout the package, so the assembled
Kronecker products take the column factor first: ``kron(col_cov,
row_cov)`` is the covariance of ``X.reshape(-1)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset, as_matrix_stack
from .errors import DimensionError, DomainError, UnsupportedModelError
from .estimators import (
    FitOptions,
    FitResult,
    fit_matrix_normal,
    fit_matrix_T_ecme,
    fit_matrix_t_px_ecme,
    fit_mvt_ecme,
)
from .specfun import sym_eigen

__all__ = [
    "VECTOR_METHODS",
    "MATRIX_METHODS",
    "VectorPcaModel",
    "MatrixPcaModel",
    "CovarianceModel",
    "estimate_covariance",
    "build_vector_pca",
    "build_matrix_pca",
    "pca_from_covariance",
    "transform",
    "reconstruct",
    "implied_covariance",
]

VECTOR_METHODS = ("PCA", "tPCA")
MATRIX_METHODS = ("FPCA", "BPCA", "TPCA", "RFPCA")


@dataclass(frozen=True)
class VectorPcaModel:
    """Whitened linear projection onto the top-q eigenvectors."""

    basis: np.ndarray
    variances: np.ndarray
    center: np.ndarray
    method: str

    @property
    def q(self) -> int:
        return self.basis.shape[1]


@dataclass(frozen=True)
class MatrixPcaModel:
    """Bilinear projection onto top eigenvectors of both factors."""

    col_basis: np.ndarray
    col_variances: np.ndarray
    row_basis: np.ndarray
    row_variances: np.ndarray
    center: np.ndarray
    method: str

    @property
    def q_c(self) -> int:
        return self.col_basis.shape[1]

    @property
    def q_r(self) -> int:
        return self.row_basis.shape[1]


@dataclass(frozen=True)
class CovarianceModel:
    """Covariance structure estimated by one of the six methods.

    Vector methods fill ``cov``; matrix methods fill the factors.  ``dof``
    and ``fit`` are carried when the method involved an iterative fit.
    """

    method: str
    center: np.ndarray
    cov: np.ndarray | None = None
    col_cov: np.ndarray | None = None
    row_cov: np.ndarray | None = None
    dof: float | None = None
    fit: FitResult | None = None


def estimate_covariance(method: str, data, opts: FitOptions = FitOptions()) -> CovarianceModel:
    """Estimate the covariance structure that backs a PCA method.

    PCA/BPCA use sample scatters; tPCA fits a multivariate t to the
    vectorized data; FPCA fits the matrix-normal; TPCA the matrix-T;
    RFPCA the matrix-t (PX-ECME).
    """
    x = as_matrix_stack(data)
    n, c, r = x.shape
    if method == "PCA":
        v = x.reshape(n, c * r)
        mu = v.mean(axis=0)
        resid = v - mu
        return CovarianceModel(method, mu, cov=resid.T @ resid / n)
    if method == "tPCA":
        fit = fit_mvt_ecme(x.reshape(n, c * r), opts)
        return CovarianceModel(method, fit.params.mean, cov=fit.params.scale.values, dof=fit.params.dof, fit=fit)
    if method == "BPCA":
        m = x.mean(axis=0)
        resid = x - m
        s_c = np.einsum("nij,nkj->ik", resid, resid) / n
        s_r = np.einsum("nji,njk->ik", resid, resid) / n
        return CovarianceModel(method, m, col_cov=s_c, row_cov=s_r)
    if method == "FPCA":
        fit = fit_matrix_normal(x, opts)
    elif method == "TPCA":
        fit = fit_matrix_T_ecme(x, opts)
    elif method == "RFPCA":
        fit = fit_matrix_t_px_ecme(x, opts)
    else:
        raise UnsupportedModelError(f"unknown method {method!r}")
    p = fit.params
    return CovarianceModel(
        method,
        p.mean,
        col_cov=p.col_cov.values,
        row_cov=p.row_cov.values,
        dof=getattr(p, "dof", None),
        fit=fit,
    )


def build_vector_pca(cov, center, q: int, method: str = "PCA") -> VectorPcaModel:
    """Top-q eigenpairs of a covariance matrix as a projection model."""
    if method not in VECTOR_METHODS:
        raise UnsupportedModelError(f"vector PCA methods are {VECTOR_METHODS}, got {method!r}")
    eig = sym_eigen(cov)
    d = eig.values.size
    if not 1 <= q <= d:
        raise DomainError(f"q must be in [1, {d}], got {q}")
    return VectorPcaModel(
        basis=eig.vectors[:, :q],
        variances=eig.values[:q],
        center=np.asarray(center, dtype=float).reshape(-1),
        method=method,
    )


def build_matrix_pca(col_cov, row_cov, center, q_c: int, q_r: int, method: str = "FPCA") -> MatrixPcaModel:
    """Independent top-q eigendecompositions of the two covariance factors."""
    if method not in MATRIX_METHODS:
        raise UnsupportedModelError(f"matrix PCA methods are {MATRIX_METHODS}, got {method!r}")
    ec = sym_eigen(col_cov)
    er = sym_eigen(row_cov)
    c, r = ec.values.size, er.values.size
    if not 1 <= q_c <= c:
        raise DomainError(f"q_c must be in [1, {c}], got {q_c}")
    if not 1 <= q_r <= r:
        raise DomainError(f"q_r must be in [1, {r}], got {q_r}")
    center = np.asarray(center, dtype=float)
    if center.shape != (c, r):
        raise DimensionError(f"center has shape {center.shape}, factors imply ({c}, {r})")
    return MatrixPcaModel(
        col_basis=ec.vectors[:, :q_c],
        col_variances=ec.values[:q_c],
        row_basis=er.vectors[:, :q_r],
        row_variances=er.values[:q_r],
        center=center,
        method=method,
    )


def pca_from_covariance(model: CovarianceModel, q: int | None = None, q_c: int | None = None, q_r: int | None = None):
    """Build the projection model matching a :class:`CovarianceModel`."""
    if model.method in VECTOR_METHODS:
        if q is None:
            raise DomainError("vector methods need q")
        return build_vector_pca(model.cov, model.center, q, model.method)
    if q_c is None or q_r is None:
        raise DomainError("matrix methods need q_c and q_r")
    return build_matrix_pca(model.col_cov, model.row_cov, model.center, q_c, q_r, model.method)


def transform(model, x):
    """Project observations into the reduced space.

    Vector models whiten: z = diag(l)^{-1/2} U' (x - center).  Matrix
    models apply the two-sided whitened projection; BPCA projects without
    whitening.  Accepts a single observation or a stack.
    """
    if isinstance(model, VectorPcaModel):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        v = np.atleast_2d(x)
        if v.shape[-1] != model.center.size:
            raise DimensionError(f"observations have dimension {v.shape[-1]}, model expects {model.center.size}")
        z = (v - model.center) @ model.basis / np.sqrt(model.variances)
        return z[0] if single else z
    if isinstance(model, MatrixPcaModel):
        x = as_matrix_stack(x) if isinstance(x, Dataset) else np.asarray(x, dtype=float)
        single = x.ndim == 2
        v = x[None] if single else x
        if v.shape[-2:] != model.center.shape:
            raise DimensionError(f"observations have shape {v.shape[-2:]}, model expects {model.center.shape}")
        core = model.col_basis.T @ (v - model.center) @ model.row_basis
        if model.method != "BPCA":
            core = core / np.sqrt(model.col_variances)[:, None] / np.sqrt(model.row_variances)[None, :]
        return core[0] if single else core
    raise UnsupportedModelError(f"cannot transform with {type(model).__name__}")


def reconstruct(model, z):
    """Adjoint of :func:`transform`; maps reduced representations back.

    transform(reconstruct(transform(x))) equals transform(x), i.e. the
    round trip is a projection onto the reduced subspace.
    """
    if isinstance(model, VectorPcaModel):
        z = np.asarray(z, dtype=float)
        single = z.ndim == 1
        v = np.atleast_2d(z)
        out = model.center + (v * np.sqrt(model.variances)) @ model.basis.T
        return out[0] if single else out
    if isinstance(model, MatrixPcaModel):
        z = np.asarray(z, dtype=float)
        single = z.ndim == 2
        v = z[None] if single else z
        if model.method != "BPCA":
            v = v * np.sqrt(model.col_variances)[:, None] * np.sqrt(model.row_variances)[None, :]
        out = model.center + model.col_basis @ v @ model.row_basis.T
        return out[0] if single else out
    raise UnsupportedModelError(f"cannot reconstruct with {type(model).__name__}")


def implied_covariance(model: CovarianceModel, cap: int = 400) -> np.ndarray:
    """Dense full-dimension covariance implied by a fitted method.

    PCA and tPCA return their (robust) sample covariance; BPCA the
    trace-normalized scatter product; FPCA and RFPCA the product of the
    fitted factors; TPCA the factor product divided by the fitted
    degrees of freedom.  Refuses when the vectorized dimension exceeds
    ``cap`` (the dense metric is meant for desk-scale comparisons).
    """
    if model.method in VECTOR_METHODS:
        d = model.cov.shape[0]
        if d > cap:
            raise DomainError(f"vectorized dimension {d} exceeds the dense-covariance cap {cap}")
        return np.asarray(model.cov, dtype=float)
    c = model.col_cov.shape[0]
    r = model.row_cov.shape[0]
    if c * r > cap:
        raise DomainError(f"vectorized dimension {c * r} exceeds the dense-covariance cap {cap}")
    full = np.kron(model.col_cov, model.row_cov)
    if model.method == "BPCA":
        return full / np.trace(model.col_cov)
    if model.method == "TPCA":
        if model.dof is None:
            raise DomainError("TPCA implied covariance needs the fitted degrees of freedom")
        return full / model.dof
    if model.method in ("FPCA", "RFPCA"):
        return full
    raise UnsupportedModelError(f"unknown method {model.method!r}")
