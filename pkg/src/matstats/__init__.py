"""Robust matrix-variate statistics.

Maximum-likelihood estimation for matrix-normal, matrix-variate t, and
matrix-variate T distributions (CM / ECME / PX-ECME algorithms), the PCA
variants derived from their covariance factors, and weight-based
detection of matrix-valued outliers.
"""

from .data import Dataset, load_dataset, save_dataset
from .distributions import (
    GammaPosterior,
    MatrixNormalParams,
    MatrixTParams,
    MatrixTTParams,
    MultivariateTParams,
    WishartPosterior,
    matrix_normal_logpdf,
    matrix_T_logpdf,
    matrix_t_logpdf,
    matrix_T_posterior,
    matrix_t_posterior_weight,
    mvt_logpdf,
    mvt_posterior_weight,
    sample,
)
from .estimators import (
    FitOptions,
    FitResult,
    fit_matrix_normal,
    fit_matrix_T_ecme,
    fit_matrix_t_ecme,
    fit_matrix_t_px_ecme,
    fit_mvt_ecme,
    prop1_diagnostic,
    solve_nu_matrix_t,
)
from .experiments import (
    ExperimentRecord,
    GroundTruth,
    SyntheticSpec,
    fnorm_distance,
    knn_classify,
    linspace,
    make_synthetic,
    run_accuracy_sweep,
    run_convergence_race,
    run_robustness_table,
    run_timing_benchmark,
    test_loglik,
)
from .outliers import OutlierReport, export_weight_scatter, score
from .pca import (
    CovarianceModel,
    MatrixPcaModel,
    VectorPcaModel,
    build_matrix_pca,
    build_vector_pca,
    estimate_covariance,
    implied_covariance,
    pca_from_covariance,
    reconstruct,
    transform,
)
from .specfun import (
    EigenSystem,
    SpdMatrix,
    digamma,
    gamma_moments,
    log_multivariate_gamma,
    multivariate_digamma,
    spd_solve_logdet,
    sym_eigen,
    wishart_moments,
)

__version__ = "0.1.0"
