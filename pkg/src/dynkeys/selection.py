"""Key-frame selection through the relaxed recovery loss.

For an indicator ``s`` in ``[0, 1]^T`` the loss is::

    recovery(s) = || (I + G diag(s) / rho)^{-1} Y ||_F^2
    total(s)    = recovery(s) + lam * sum(s)

with ``G = D D^T`` the dictionary Gram matrix.  For binary ``s`` the recovery
term is the squared error of rebuilding every frame from the selected ones
through their minimum-norm code, with the selected block regularised by
``rho``.  :func:`select_keyframes` minimises ``total`` over sigmoid logits
with an increasing sharpness, :func:`brute_force_select` and
:func:`baseline_select` provide reference selections.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import linalg
from scipy.special import comb, expit

from .coding import SingularSystemError, as_sequence, decode, min_norm_code, pinv_code, selection_indices

__all__ = [
    "Indicator",
    "SelectorConfig",
    "SelectionResult",
    "OptimizationError",
    "BudgetExceededError",
    "loss",
    "loss_gradient",
    "recovery",
    "select_keyframes",
    "brute_force_select",
    "baseline_select",
    "uniform_indices",
    "reconstruction_error",
]


TIE_RTOL = 1e-12


class OptimizationError(RuntimeError):
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class BudgetExceededError(RuntimeError):
    pass


@dataclass(frozen=True)
class Indicator:
    """Soft or binary frame indicator.

    ``indices()`` returns the frames whose value exceeds ``threshold``.
    """

    values: np.ndarray
    threshold: float = 0.5

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).reshape(-1)
        if np.any(~np.isfinite(v)) or np.any(v < 0) or np.any(v > 1):
            raise ValueError("indicator values must lie in [0, 1]")
        if not 0 < self.threshold < 1:
            raise ValueError("threshold must lie in (0, 1)")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_indices(cls, indices, num_frames, threshold=0.5):
        v = np.zeros(int(num_frames))
        v[np.asarray(indices, dtype=int)] = 1.0
        return cls(v, threshold)

    def __len__(self):
        return self.values.size

    def indices(self):
        return np.flatnonzero(self.values > self.threshold)

    def binarize(self):
        return Indicator((self.values > self.threshold).astype(float), self.threshold)

    @property
    def count(self):
        return int(self.indices().size)

    def selection_matrix(self):
        """``r x T`` binary matrix picking the selected frames in order."""
        idx = self.indices()
        p = np.zeros((idx.size, self.values.size))
        p[np.arange(idx.size), idx] = 1.0
        return p


@dataclass
class SelectorConfig:
    """Parameters of :func:`select_keyframes`.

    The optimiser works on a rescaled problem so that one setting transfers
    across dictionaries and sequences:

    * ``normalize``: the sequence is scaled to unit mean energy per frame
      (``||Y||_F^2 = T``), so ``lam`` is the recovery gain, in average-frame
      energies, a frame must bring to be worth selecting.
    * ``relative_rho``: the perturbation actually used is
      ``rho * mean(diag(G))``.  The recovery term only depends on ``G / rho``,
      so this makes ``rho`` independent of the dictionary's overall scale.

    Logits start at ``init_noise`` times seeded standard normal draws; the
    small spread breaks ties between interchangeable frames, which plain
    gradient descent would otherwise keep identical forever.  With
    ``polish`` the binarised result is refined by single-frame flips that
    lower the (rescaled) loss.
    """

    lam: float = 0.8
    rho: float = 0.3
    relative_rho: bool = True
    alpha_start: float = 1.0
    alpha_growth: float = 0.1
    max_iter: int = 500
    learning_rate: float = 1.0
    threshold: float = 0.5
    normalize: bool = True
    init_noise: float = 0.01
    seed: int = 0
    polish: bool = True

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if self.lam < 0:
            raise ValueError("lam must be non-negative")
        if self.alpha_growth < 0:
            raise ValueError("alpha_growth must be non-negative")
        if self.alpha_start <= 0:
            raise ValueError("alpha_start must be positive")
        if not 0 < self.threshold < 1:
            raise ValueError("threshold must lie in (0, 1)")
        if self.max_iter < 0:
            raise ValueError("max_iter must be non-negative")

    def effective_rho(self, dictionary):
        """Absolute perturbation for ``dictionary``."""
        if not self.relative_rho:
            return float(self.rho)
        scale = float(np.mean(np.diag(_gram(dictionary))))
        return float(self.rho) * (scale if scale > 0 else 1.0)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, doc):
        names = cls.__dataclass_fields__
        return cls(**{k: v for k, v in doc.items() if k in names})


@dataclass
class SelectionResult:
    """Outcome of :func:`select_keyframes`.

    ``recovery`` is the recovery term of the binarised selection on the
    original sequence with the absolute ``rho`` that was used;
    ``reconstruction_error`` is ``||Y - D C_r||_F^2`` for the minimum-norm
    code of the selected rows (``nan`` if that system is singular or the
    selection is empty and ``Y`` is not zero).
    """

    indicator: Indicator
    recovery: float
    lam: float
    rho: float
    iterations: int
    reconstruction_error: float = float("nan")
    loss_trace: list = field(default_factory=list)
    alpha_trace: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    @property
    def indices(self):
        return self.indicator.indices()

    @property
    def count(self):
        return self.indicator.count

    def to_json(self):
        return {
            "indices": [int(i) for i in self.indicator.indices()],
            "soft": [float(v) for v in self.indicator.values],
            "recovery": float(self.recovery),
            "lambda": float(self.lam),
            "rho": float(self.rho),
            "iterations": int(self.iterations),
            "reconstruction_error": float(self.reconstruction_error),
            "config": dict(self.config),
        }


def _gram(dictionary):
    return dictionary.gram if hasattr(dictionary, "gram") else np.asarray(dictionary, float)


def _values(s):
    return s.values if isinstance(s, Indicator) else np.asarray(s, dtype=float).reshape(-1)


def _system(gram, s, rho):
    a = gram * (s / rho)[None, :]
    a[np.diag_indices_from(a)] += 1.0
    return a


def _factor(gram, s, rho):
    if not rho > 0:
        raise ValueError("rho must be positive")
    a = _system(gram, s, rho)
    lu = linalg.lu_factor(a, check_finite=False)
    assert np.all(np.diag(lu[0]) != 0), "I + G diag(s)/rho is singular"
    return lu


def recovery(dictionary, y, s, rho):
    """Recovery term of the relaxed loss (linear solve, no explicit inverse)."""
    g = _gram(dictionary)
    y = as_sequence(y)
    s = _values(s)
    if g.shape[0] != y.shape[0] or s.size != y.shape[0]:
        raise ValueError("dictionary, sequence and indicator must share the frame count")
    r = linalg.lu_solve(_factor(g, s, rho), y, check_finite=False)
    return float(np.sum(r * r))


def loss(dictionary, y, s, lam, rho):
    """Return ``(total, recovery, count)`` of the relaxed selection loss."""
    rec = recovery(dictionary, y, s, rho)
    count = float(np.sum(_values(s)))
    return rec + lam * count, rec, count


def loss_gradient(dictionary, y, s, lam, rho):
    """Analytic gradient of the total loss with respect to ``s``.

    With ``A = I + G diag(s)/rho``, ``R = A^{-1} Y`` and ``W = A^{-T} R``::

        d total / d s_i = lam - (2/rho) * sum_j (G W)_ij R_ij
    """
    g = _gram(dictionary)
    y = as_sequence(y)
    s = _values(s)
    if g.shape[0] != y.shape[0] or s.size != y.shape[0]:
        raise ValueError("dictionary, sequence and indicator must share the frame count")
    lu = _factor(g, s, rho)
    r = linalg.lu_solve(lu, y, check_finite=False)
    w = linalg.lu_solve(lu, r, trans=1, check_finite=False)
    return lam - (2.0 / rho) * np.sum((g @ w) * r, axis=1)


def reconstruction_error(dictionary, y, selection):
    """``||Y - D C_r||_F^2`` for the minimum-norm code of the selected rows.

    An empty selection reconstructs zero.  When the selected rows are
    linearly dependent the pseudo-inverse code is used instead.
    """
    y = as_sequence(y)
    idx = selection_indices(selection, y.shape[0])
    if idx.size == 0:
        return float(np.sum(y * y))
    try:
        code = min_norm_code(dictionary, idx, y[idx])
    except SingularSystemError:
        code = pinv_code(dictionary, idx, y[idx])
    r = y - decode(dictionary, code)
    return float(np.sum(r * r))


def _polish(gram, y, s, lam, rho, threshold):
    """Single-frame flips of the binarised indicator while they lower the loss.

    Gradient descent can leave interchangeable frames (e.g. in a constant
    sequence) switched on together; a flip pass removes such redundancy.
    """
    on = s > threshold
    best = loss(gram, y, on.astype(float), lam, rho)[0]
    improved = True
    while improved:
        improved = False
        for i in range(on.size):
            on[i] = not on[i]
            val = loss(gram, y, on.astype(float), lam, rho)[0]
            if val < best - TIE_RTOL * abs(best):
                best, improved = val, True
            else:
                on[i] = not on[i]
    out = s.copy()
    out[on & (s <= threshold)] = 1.0
    out[~on & (s > threshold)] = 0.0
    return out


def select_keyframes(dictionary, y, cfg=None, init_logits=None):
    """Minimise the relaxed loss over sigmoid logits with annealed sharpness.

    The indicator is ``s = sigmoid(alpha_k * x)`` with
    ``alpha_k = alpha_start + k * alpha_growth`` at iteration ``k``.  The
    logits start near zero (``s ~ 0.5``) and follow plain gradient descent on
    the (rescaled, see :class:`SelectorConfig`) loss.  If no entry ends above
    the threshold while ``Y`` is non-zero, the largest entry is raised just
    above it, so the selection is empty only for ``Y = 0``.

    Returns a :class:`SelectionResult`.

    Raises
    ------
    OptimizationError
        When the loss becomes non-finite; the partial trace is attached.
    """
    cfg = cfg or SelectorConfig()
    y = as_sequence(y)
    g = _gram(dictionary)
    t = y.shape[0]
    if g.shape[0] != t:
        raise ValueError(f"dictionary has {g.shape[0]} rows but the sequence has {t} frames")

    rho = cfg.effective_rho(g)
    energy = float(np.sum(y * y))
    y_opt = y * math.sqrt(t / energy) if cfg.normalize and energy > 0 else y

    if init_logits is None:
        x = cfg.init_noise * np.random.default_rng(cfg.seed).standard_normal(t)
    else:
        x = np.array(init_logits, dtype=float)
    loss_trace, alpha_trace = [], []
    for k in range(cfg.max_iter):
        alpha = cfg.alpha_start + k * cfg.alpha_growth
        s = expit(alpha * x)
        total, _, _ = loss(g, y_opt, s, cfg.lam, rho)
        if not np.isfinite(total):
            raise OptimizationError(f"non-finite loss at iteration {k}", loss_trace)
        loss_trace.append(total)
        alpha_trace.append(alpha)
        grad_x = loss_gradient(g, y_opt, s, cfg.lam, rho) * alpha * s * (1.0 - s)
        if not np.all(np.isfinite(grad_x)):
            raise OptimizationError(f"non-finite gradient at iteration {k}", loss_trace)
        x = x - cfg.learning_rate * grad_x
    iterations = cfg.max_iter
    s = expit((cfg.alpha_start + iterations * cfg.alpha_growth) * x)
    if cfg.polish:
        s = _polish(g, y_opt, s, cfg.lam, rho, cfg.threshold)
    if energy > 0 and not np.any(s > cfg.threshold):
        # a non-zero sequence always keeps its most indicated frame
        k = int(np.argmax(s))
        s[k] = np.nextafter(cfg.threshold, 1.0)
    ind = Indicator(s, cfg.threshold)
    rec = recovery(g, y, ind.binarize(), rho)
    err = reconstruction_error(dictionary, y, ind) if hasattr(dictionary, "matrix") else float("nan")
    return SelectionResult(ind, rec, cfg.lam, rho, iterations, err, loss_trace, alpha_trace, cfg.to_dict())


def brute_force_select(dictionary, y, r, rho=1e-2, budget=10**6):
    """Exhaustive search over all ``r``-subsets for the smallest recovery.

    Ties go to the lexicographically smallest index set: subsets are visited
    in itertools order and must improve on the incumbent by more than a
    relative ``TIE_RTOL``, so round-off between symmetric subsets is a tie.

    Raises
    ------
    BudgetExceededError
        If ``C(T, r)`` exceeds ``budget``; use ``baseline_select`` with
        ``kind="best_of_random"`` instead.
    """
    g = _gram(dictionary)
    y = as_sequence(y)
    t = y.shape[0]
    if not 1 <= r <= t:
        raise ValueError(f"r must lie in [1, {t}]")
    n = comb(t, r, exact=True)
    if n > budget:
        raise BudgetExceededError(
            f"C({t}, {r}) = {n} subsets exceeds the budget of {budget}; "
            "use sampled selection (baseline_select kind='best_of_random')"
        )
    best, best_val = None, math.inf
    s = np.zeros(t)
    for subset in itertools.combinations(range(t), r):
        s[:] = 0.0
        s[list(subset)] = 1.0
        val = recovery(g, y, s, rho)
        if best is None or val < best_val - TIE_RTOL * abs(best_val):
            best, best_val = subset, val
    return np.array(best, dtype=int), best_val


def uniform_indices(num_frames, r):
    if not 1 <= r <= num_frames:
        raise ValueError(f"r must lie in [1, {num_frames}]")
    if r == 1:
        return np.array([0])
    # round half up; numpy's banker's rounding would differ on exact halves
    return np.floor(np.arange(r) * (num_frames - 1) / (r - 1) + 0.5).astype(int)


def baseline_select(kind, dictionary, y, r, n=100, seed=0, rho=1e-2):
    """Reference selections of ``r`` frames.

    ``kind="uniform"`` spaces frames evenly from the first to the last;
    ``kind="best_of_random"`` keeps the lowest-recovery subset among ``n``
    seeded random draws.
    """
    y = as_sequence(y)
    t = y.shape[0]
    if kind == "uniform":
        return Indicator.from_indices(uniform_indices(t, r), t)
    if kind != "best_of_random":
        raise ValueError(f"unknown baseline kind {kind!r}")
    if not 1 <= r <= t:
        raise ValueError(f"r must lie in [1, {t}]")
    g = _gram(dictionary)
    rng = np.random.default_rng(seed)
    best, best_val = None, math.inf
    for _ in range(int(n)):
        idx = np.sort(rng.choice(t, size=r, replace=False))
        val = recovery(g, y, Indicator.from_indices(idx, t), rho)
        if val < best_val:
            best, best_val = idx, val
    return Indicator.from_indices(best, t)


def indicator_from(selection, num_frames):
    return Indicator.from_indices(selection_indices(selection, num_frames), num_frames)
