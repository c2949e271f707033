"""Per-bin local rational models solved as weighted linear least squares.

At a center bin k the stacked output spectra Z(k+r) over the window
r = -n_w..n_w are modeled as

    D(r) Z(k+r) = N(r) R(k+r) + M(r) + residual,

with N, M, D matrix polynomials in the local variable, D(0) = I, so the
response matrix and transient vector are read directly from the solution.
The local variable is normalized to r/n_w for conditioning; the estimates at
the center are basis-independent.  Windows wrap circularly because DFT
spectra are periodic in the bin index.
"""

import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .errors import LocalFitError


@dataclass(frozen=True)
class LocalModelConfig:
    degree_num: int = 3
    degree_transient: int = 3
    degree_den: int = 3
    half_window: int = 30
    denominator: str = "diagonal"  # 'diagonal' (per output row) or 'full'
    normalize_local_variable: bool = True
    condition_threshold: float = 1e12

    def __post_init__(self):
        if min(self.degree_num, self.degree_transient, self.degree_den) < 0:
            raise LocalFitError("polynomial degrees must be nonnegative")
        if self.half_window < 1:
            raise LocalFitError("half_window must be at least 1")
        if self.denominator not in ("diagonal", "full"):
            raise LocalFitError("denominator must be 'diagonal' or 'full'")


def param_count(config, n_u, n_y, factor):
    """(decision parameters, data points) for one local fit.

    Parameters: (n_u F + n_y) (n_u F (R_n + 1) + R_m + 1 + R_d);
    data points: (2 n_w + 1)(n_u F + n_y).
    """
    nr = n_u * factor
    nz = nr + n_y
    params = nz * (nr * (config.degree_num + 1)
                   + config.degree_transient + 1 + config.degree_den)
    data = (2 * config.half_window + 1) * nz
    return params, data


@dataclass(frozen=True)
class LocalFitResult:
    center_bin: int
    response: np.ndarray      # (n_z, n_r) complex
    transient: np.ndarray     # (n_z,) complex
    residual: float
    condition: float
    window_bins: np.ndarray
    fallback: bool = False
    error: str | None = None

    @property
    def failed(self):
        return self.error is not None


def _window_indices(k, n_w, n_bins, bin_mask=None):
    rs = np.arange(-n_w, n_w + 1)
    idx = (k + rs) % n_bins
    if bin_mask is not None:
        keep = np.asarray(bin_mask, dtype=bool)[idx]
        rs, idx = rs[keep], idx[keep]
    return rs, idx


_NULL_LEAK_TOL = 1e-7


def _solve(A, b, watched):
    """Column-equilibrated least squares with identifiability analysis.

    Unit-norm column scaling removes the (often enormous) unit disparity
    between excitation, transient, and output columns, so the reported
    condition number measures genuine collinearity; the solution itself is
    invariant under the rescaling.

    Data lying exactly in the model class makes the denominator columns
    linear combinations of the others, so the regressor is rank deficient
    even though the center estimates stay unique (the normalization pins the
    denominator at the center).  `watched` lists the coordinates holding the
    center estimates; deficiency is benign exactly when the null space has no
    component on them, in which case the minimum-norm solution is returned.
    Otherwise the deficiency leaks into the estimates and `leak` is large.
    """
    norms = np.linalg.norm(A, axis=0)
    scale = np.where(norms > 0, norms, 1.0)
    a_eq = A / scale
    u, s, vh = np.linalg.svd(a_eq, full_matrices=False)
    smax = s[0] if s.size else 0.0
    tol = max(a_eq.shape) * np.finfo(float).eps * smax
    rank = int(np.sum(s > tol))
    if rank == 0:
        return np.zeros(A.shape[1], dtype=complex), np.inf, True, 1.0
    proj = u[:, :rank].conj().T @ b
    theta_eq = vh[:rank].conj().T @ (proj / s[:rank])
    cond = float(s[0] / s[rank - 1])
    leak = 0.0
    if rank < s.size:
        leak = float(np.abs(vh[rank:][:, watched]).max())
    return theta_eq / scale, cond, rank < s.size, leak


def _fit_diagonal(Z, R, k, config, rs, idx):
    n_z = Z.shape[0]
    n_r = R.shape[0]
    rho = rs / config.half_window if config.normalize_local_variable \
        else rs.astype(float)
    rn, rm, rd = config.degree_num, config.degree_transient, config.degree_den
    n_cols = n_r * (rn + 1) + (rm + 1) + rd
    if len(rs) < n_cols:
        raise LocalFitError(
            f"window supplies {len(rs)} rows per output for {n_cols} "
            f"parameters at bin {k}"
        )
    Rw = R[:, idx].T
    watched = list(range(n_r)) + [n_r * (rn + 1)]
    response = np.zeros((n_z, n_r), dtype=complex)
    transient = np.zeros(n_z, dtype=complex)
    res_sq = 0.0
    cond_max = 0.0
    for i in range(n_z):
        cols = [(rho ** s)[:, None] * Rw for s in range(rn + 1)]
        cols.extend((rho ** s)[:, None] for s in range(rm + 1))
        zi = Z[i, idx]
        cols.extend(-(rho ** s)[:, None] * zi[:, None] for s in range(1, rd + 1))
        A = np.hstack(cols)
        theta, cond, deficient, leak = _solve(A, zi, watched)
        if deficient and leak > _NULL_LEAK_TOL:
            raise LocalFitError(
                f"rank-deficient regressor at bin {k}, output row {i}: "
                f"estimates not identifiable (null-space leakage {leak:.2e}, "
                f"condition {cond:.3e})"
            )
        response[i] = theta[:n_r]
        transient[i] = theta[n_r * (rn + 1)]
        res_sq += float(np.sum(np.abs(A @ theta - zi) ** 2))
        cond_max = max(cond_max, cond)
    return response, transient, np.sqrt(res_sq), cond_max


def _fit_full(Z, R, k, config, rs, idx):
    n_z = Z.shape[0]
    n_r = R.shape[0]
    rho = rs / config.half_window if config.normalize_local_variable \
        else rs.astype(float)
    rn, rm, rd = config.degree_num, config.degree_transient, config.degree_den
    n_cols = n_z * n_r * (rn + 1) + n_z * (rm + 1) + n_z * n_z * rd
    n_rows = len(rs) * n_z
    if n_rows < n_cols:
        raise LocalFitError(
            f"window supplies {n_rows} rows for {n_cols} parameters at bin {k}"
        )
    A = np.zeros((n_rows, n_cols), dtype=complex)
    b = np.empty(n_rows, dtype=complex)
    eye = np.eye(n_z)
    for w, (r_off, kb) in enumerate(zip(rho, idx)):
        rows = slice(w * n_z, (w + 1) * n_z)
        col = 0
        # kron(vec, I) lays the unknown matrices out input-major: the block
        # [i, j*n_z + i'] = vec_j * delta_{i i'} realizes (Matrix @ vec)_i
        for s in range(rn + 1):
            A[rows, col:col + n_z * n_r] = np.kron(R[:, kb], eye) * (r_off ** s)
            col += n_z * n_r
        for s in range(rm + 1):
            A[rows, col:col + n_z] = eye * (r_off ** s)
            col += n_z
        for s in range(1, rd + 1):
            A[rows, col:col + n_z * n_z] = -np.kron(Z[:, kb], eye) * (r_off ** s)
            col += n_z * n_z
        b[rows] = Z[:, kb]
    watched = list(range(n_z * n_r)) + list(
        range(n_z * n_r * (rn + 1), n_z * n_r * (rn + 1) + n_z))
    theta, cond, deficient, leak = _solve(A, b, watched)
    if deficient and leak > _NULL_LEAK_TOL:
        raise LocalFitError(
            f"rank-deficient regressor at bin {k}: estimates not "
            f"identifiable (null-space leakage {leak:.2e}, "
            f"condition {cond:.3e})"
        )
    response = theta[:n_z * n_r].reshape(n_r, n_z).T
    transient = theta[n_z * n_r * (rn + 1):n_z * n_r * (rn + 1) + n_z]
    res = float(np.linalg.norm(A @ theta - b))
    return response, transient, res, cond


def fit_local(Z, R, k, config, bin_mask=None):
    """Fit the local model around center bin k.

    Z has shape (n_z, M) (stacked outputs), R has shape (n_r, M); both are
    full-circle spectra on the same grid.  Returns a LocalFitResult with the
    response matrix, transient vector, residual norm, and window condition
    number.  When the condition exceeds the configured threshold the fit falls
    back to a pure local polynomial (denominator fixed to identity) and the
    result is marked accordingly.
    """
    n_bins = Z.shape[1]
    if R.shape[1] != n_bins:
        raise LocalFitError("Z and R must share the same bin grid")
    rs, idx = _window_indices(k, config.half_window, n_bins, bin_mask)
    fitter = _fit_diagonal if config.denominator == "diagonal" else _fit_full
    response, transient, res, cond = fitter(Z, R, k, config, rs, idx)
    fallback = False
    if cond > config.condition_threshold and config.degree_den > 0:
        warnings.warn(
            f"condition {cond:.3e} above threshold at bin {k}; "
            f"falling back to a polynomial model",
            RuntimeWarning, stacklevel=2,
        )
        cfg0 = replace(config, degree_den=0)
        response, transient, res, cond = fitter(Z, R, k, cfg0, rs, idx)
        fallback = True
    return LocalFitResult(k, response, transient, res, cond, idx,
                          fallback=fallback)


def _failed_result(k, n_z, n_r, message):
    nan_mat = np.full((n_z, n_r), np.nan + 0j)
    nan_vec = np.full(n_z, np.nan + 0j)
    return LocalFitResult(k, nan_mat, nan_vec, np.nan, np.inf,
                          np.empty(0, dtype=int), error=message)


def sweep_bins(Z, R, bins, config, bin_mask=None):
    """Independent local fits at each requested bin, in input order.

    Per-bin failures are recorded in the corresponding result instead of
    aborting the sweep.  Setting MRFRF_THREADS > 1 fits bins concurrently;
    results are ordered by the input bin order either way.
    """
    bins = list(bins)
    n_z, n_r = Z.shape[0], R.shape[0]

    def one(k):
        try:
            return fit_local(Z, R, int(k), config, bin_mask)
        except LocalFitError as e:
            return _failed_result(int(k), n_z, n_r, str(e))

    workers = int(os.environ.get("MRFRF_THREADS", "1") or "1")
    if workers > 1 and len(bins) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, bins))
    return [one(k) for k in bins]
