"""Weight-based scoring of matrix-valued outliers.

At a converged matrix-variate t (or multivariate t) fit the expected
latent weights average to one; observations whose weight is far below
that baseline are outliers.  The matrix-T family has no scalar weight,
so it is rejected here.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .data import Dataset, as_matrix_stack, as_vector_stack
from .errors import UnsupportedModelError
from .estimators import FitResult
from .distributions import matrix_t_posterior_weight, mvt_posterior_weight

__all__ = ["OutlierReport", "score", "export_weight_scatter"]

DEFAULT_THRESHOLD = 0.5


@dataclass(frozen=True)
class OutlierReport:
    """Per-observation weights with ranks, flags, and optional ground truth.

    ``ranks`` is the permutation that sorts observations by ascending
    weight (most suspicious first); ``flags[i]`` is ``weights[i] <
    threshold``.
    """

    weights: np.ndarray
    ranks: np.ndarray
    flags: np.ndarray
    threshold: float
    model: str
    truth: np.ndarray | None = None


def score(data, fit: FitResult, threshold: float = DEFAULT_THRESHOLD) -> OutlierReport:
    """Score observations by their expected weight under a fitted model.

    ``data`` may be the training set or new observations; weights are the
    posterior means at the fitted parameters.  Ground-truth outlier flags
    are carried over from the dataset when present.
    """
    if fit.model == "matrix_t":
        x = as_matrix_stack(data)
        weights = matrix_t_posterior_weight(x, fit.params).mean
    elif fit.model == "multivariate_t":
        v = as_vector_stack(data)
        weights = mvt_posterior_weight(v, fit.params).mean
    else:
        raise UnsupportedModelError(
            f"outlier scoring needs a scalar latent weight; the {fit.model!r} model has none"
        )
    weights = np.asarray(weights, dtype=float)
    truth = data.outlier_truth if isinstance(data, Dataset) else None
    return OutlierReport(
        weights=weights,
        ranks=np.argsort(weights, kind="stable"),
        flags=weights < threshold,
        threshold=float(threshold),
        model=fit.model,
        truth=None if truth is None else np.asarray(truth, dtype=bool),
    )


def export_weight_scatter(report: OutlierReport, path: str) -> None:
    """Write the report as CSV: index, weight, [is_planted_outlier,] flag.

    Weights are printed with 17 significant digits so re-reading the file
    reproduces them exactly.  The ground-truth column appears only when
    the report carries it.
    """
    path = os.fspath(path)
    with_truth = report.truth is not None
    header = "index,weight,is_planted_outlier,flag" if with_truth else "index,weight,flag"
    try:
        with open(path, "w") as fh:
            fh.write(header + "\n")
            for i, w in enumerate(report.weights):
                if with_truth:
                    fh.write(f"{i},{w:.17g},{int(report.truth[i])},{int(report.flags[i])}\n")
                else:
                    fh.write(f"{i},{w:.17g},{int(report.flags[i])}\n")
    except OSError as exc:
        raise OSError(f"failed to write weight scatter to {path}: {exc}") from exc
