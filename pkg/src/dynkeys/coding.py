"""Atomic codes over a dynamics dictionary.

Two encoders are provided: an l1-regularised (lasso) code found with a
monotone accelerated proximal gradient method, and the closed-form minimum
Frobenius-norm code that exactly interpolates a subset of rows.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

__all__ = [
    "AtomicCode",
    "SingularSystemError",
    "as_sequence",
    "selection_indices",
    "lasso_objective",
    "lipschitz_constant",
    "soft_threshold",
    "encode_lasso",
    "min_norm_code",
    "pinv_code",
    "decode",
    "spd_solve",
]


class SingularSystemError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class AtomicCode:
    """``N x M`` coefficients and the row count of the dictionary that made them."""

    matrix: np.ndarray
    producing_dictionary_rows: int

    def __post_init__(self):
        if not np.all(np.isfinite(self.matrix)):
            raise ValueError("atomic code has non-finite entries")

    @property
    def shape(self):
        return self.matrix.shape


def as_sequence(y, name="sequence"):
    """Validate a feature sequence and return it as a 2-D float array.

    One-dimensional input is treated as a single feature track (``T x 1``).
    """
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    if y.ndim != 2:
        raise ValueError(f"{name} must be a T x M matrix, got shape {y.shape}")
    if y.shape[0] < 1:
        raise ValueError(f"{name} must have at least one frame")
    if not np.all(np.isfinite(y)):
        raise ValueError(f"{name} has non-finite entries")
    return y


def selection_indices(selection, num_rows=None):
    """Sorted distinct frame indices from a mask, an index list or an Indicator."""
    if hasattr(selection, "indices"):
        idx = np.asarray(selection.indices(), dtype=int)
    else:
        sel = np.asarray(selection)
        if sel.dtype == bool:
            if num_rows is not None and sel.shape[0] != num_rows:
                raise ValueError("selection mask length does not match the dictionary")
            idx = np.flatnonzero(sel)
        else:
            idx = sel.astype(int).reshape(-1)
            if np.unique(idx).size != idx.size:
                raise ValueError("selection indices must be distinct")
            idx = np.sort(idx)
    if num_rows is not None and idx.size and (idx[0] < 0 or idx[-1] >= num_rows):
        raise ValueError(f"selection indices must lie in [0, {num_rows})")
    return idx


def _check_rows(dictionary, y):
    if dictionary.num_rows != y.shape[0]:
        raise ValueError(
            f"dictionary has {dictionary.num_rows} rows but the sequence has {y.shape[0]} frames"
        )


def soft_threshold(x, t):
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def lasso_objective(d, y, c, alpha):
    r = y - d @ c
    return float(np.sum(r * r) + alpha * np.sum(np.abs(c)))


def lipschitz_constant(d, n_iter=100, tol=1e-10, seed=0):
    """Power-method estimate of ``||D^T D||_2`` (largest eigenvalue)."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(d.shape[1])
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(n_iter):
        w = d.T @ (d @ v)
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return 0.0
        v = w / nrm
        if abs(nrm - est) <= tol * nrm:
            est = nrm
            break
        est = nrm
    return float(est)


def encode_lasso(dictionary, y, alpha=0.1, max_iter=100, tol=1e-6, init=None, return_info=False):
    """Lasso code minimising ``||Y - DC||_F^2 + alpha * sum|C|``.

    Monotone FISTA with fixed step ``1/L``, ``L = 2 ||D^T D||_2`` (the factor
    2 comes from the unhalved quadratic).  The reported iterates never increase
    the objective.  Iteration stops when the relative objective change drops
    below ``tol``.

    Parameters
    ----------
    dictionary : DynDictionary or ndarray
    y : array_like, shape (T, M)
    init : ndarray, optional
        Warm start; the returned objective is never above the warm start's.
    return_info : bool
        Also return ``{"objective": [...], "iterations": k}``.
    """
    d = dictionary.matrix if hasattr(dictionary, "matrix") else np.asarray(dictionary, float)
    y = as_sequence(y)
    if d.shape[0] != y.shape[0]:
        raise ValueError(f"dictionary has {d.shape[0]} rows but the sequence has {y.shape[0]} frames")
    if not alpha > 0:
        raise ValueError("alpha must be positive")

    lip = 2.0 * lipschitz_constant(d)
    n, m = d.shape[1], y.shape[1]
    c = np.zeros((n, m)) if init is None else np.array(init, dtype=float)
    if lip == 0.0:
        c = np.zeros((n, m))
        trace = [lasso_objective(d, y, c, alpha)]
        code = AtomicCode(c, d.shape[0])
        return (code, {"objective": trace, "iterations": 0}) if return_info else code
    # power iteration converges from below; pad so 1/L stays a safe step
    lip *= 1.0 + 1e-6
    step = 1.0 / lip
    dty = d.T @ y
    dtd = d.T @ d

    f = lasso_objective(d, y, c, alpha)
    trace = [f]
    z = c.copy()
    t = 1.0
    it = 0
    for it in range(1, max_iter + 1):
        grad = 2.0 * (dtd @ z - dty)
        u = soft_threshold(z - step * grad, step * alpha)
        fu = lasso_objective(d, y, u, alpha)
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        c_prev = c
        if fu <= f:
            c, f_new = u, fu
        else:
            f_new = f
        z = c + (t / t_next) * (u - c) + ((t - 1.0) / t_next) * (c - c_prev)
        t = t_next
        rel = abs(f - f_new) / max(abs(f), np.finfo(float).tiny)
        f = f_new
        trace.append(f)
        if rel < tol and fu <= trace[-2]:
            break
    code = AtomicCode(c, d.shape[0])
    if return_info:
        return code, {"objective": trace, "iterations": it}
    return code


def spd_solve(a, b, what="system"):
    """Solve ``a x = b`` for symmetric positive definite ``a`` via Cholesky.

    Raises :class:`SingularSystemError` when the factorisation fails or the
    matrix is numerically singular (reciprocal condition below ``T * eps``).
    """
    try:
        factor = linalg.cho_factor(a, lower=True, check_finite=False)
    except linalg.LinAlgError as exc:
        raise SingularSystemError(f"{what} is not positive definite") from exc
    diag = np.abs(np.diag(factor[0]))
    if diag.size and (diag.min() == 0.0 or (diag.min() / diag.max()) ** 2 < a.shape[0] * np.finfo(float).eps):
        raise SingularSystemError(f"{what} is numerically singular")
    return linalg.cho_solve(factor, b, check_finite=False)


def min_norm_code(dictionary, selection, seq_rows, jitter=0.0):
    """Minimum Frobenius-norm code that reproduces the selected rows.

    Returns ``C_r = D_r^T (D_r D_r^T + jitter I)^{-1} Y_r`` where ``D_r`` are
    the dictionary rows picked by ``selection``.

    Raises
    ------
    SingularSystemError
        If ``D_r D_r^T`` is numerically singular and ``jitter`` is zero.
        Pass a positive jitter to regularise.
    """
    idx = selection_indices(selection, dictionary.num_rows)
    if idx.size < 1:
        raise ValueError("selection must contain at least one frame")
    y_r = as_sequence(seq_rows, "seq_rows")
    if y_r.shape[0] != idx.size:
        raise ValueError(f"selection has {idx.size} frames but seq_rows has {y_r.shape[0]} rows")
    if jitter < 0:
        raise ValueError("jitter must be non-negative")
    d_r = dictionary.matrix[idx]
    k = dictionary.gram[np.ix_(idx, idx)]
    if jitter:
        k = k + jitter * np.eye(idx.size)
    try:
        w = spd_solve(k, y_r, "D_r D_r^T")
    except SingularSystemError as exc:
        if jitter:
            raise
        raise SingularSystemError(
            f"{exc}; the selected dictionary rows are (nearly) dependent, pass jitter > 0"
        ) from None
    return AtomicCode(d_r.T @ w, dictionary.num_rows)


def pinv_code(dictionary, selection, seq_rows):
    """Minimum-norm least-squares code ``pinv(D_r) Y_r`` of the selected rows.

    Agrees with :func:`min_norm_code` when ``D_r`` has full row rank and is its
    ``jitter -> 0`` limit otherwise, e.g. when more frames are selected than
    the dictionary has atoms.
    """
    idx = selection_indices(selection, dictionary.num_rows)
    if idx.size < 1:
        raise ValueError("selection must contain at least one frame")
    y_r = as_sequence(seq_rows, "seq_rows")
    if y_r.shape[0] != idx.size:
        raise ValueError(f"selection has {idx.size} frames but seq_rows has {y_r.shape[0]} rows")
    c, *_ = linalg.lstsq(dictionary.matrix[idx], y_r, lapack_driver="gelsd")
    return AtomicCode(c, dictionary.num_rows)


def decode(dictionary, code):
    """Sequence ``D C`` over every row of ``dictionary``.

    Extend the dictionary with :func:`dynkeys.dictionary.extend_rows` first to
    predict frames past the end of the coded window.
    """
    c = code.matrix if isinstance(code, AtomicCode) else np.asarray(code, dtype=float)
    if c.ndim == 1:
        c = c[:, None]
    if c.shape[0] != dictionary.num_atoms:
        raise ValueError(f"code has {c.shape[0]} rows but the dictionary has {dictionary.num_atoms} atoms")
    return dictionary.matrix @ c
