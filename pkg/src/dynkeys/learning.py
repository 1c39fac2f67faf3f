"""Learning dictionary poles from training sequences.

The objective is the mean lasso cost over a corpus::

    L_dyn = mean_i  ||Y_i - D(p) C_i||_F^2 + alpha * sum|C_i|

minimised by alternation: lasso codes for the current poles, then a
gradient step on pole magnitudes and phases with the codes held fixed.
Complex poles move in (magnitude, phase), so conjugate pairs stay exact;
real poles only move radially and the constant atom never moves.
"""
from __future__ import annotations

import numpy as np

from .coding import as_sequence, encode_lasso, lasso_objective
from .dictionary import COMPLEX, REAL, DuplicatePoleError, build_dictionary

__all__ = [
    "DivergenceError",
    "corpus_codes",
    "evaluate_dictionary",
    "pole_gradient",
    "project_poles",
    "train_dictionary",
    "dominant_pole",
]

LASSO_ITER = 300
PHASE_EPS = 1e-6
MIN_MAGNITUDE = 1e-6


class DivergenceError(RuntimeError):
    """Training loss exceeded the divergence bound; ``trace`` holds the losses so far."""

    def __init__(self, msg, trace):
        super().__init__(msg)
        self.trace = list(trace)


def _frames(corpus):
    seqs = [as_sequence(y) for y in corpus]
    lengths = {y.shape[0] for y in seqs}
    if len(lengths) > 1:
        raise ValueError(f"all sequences must share the frame count, got {sorted(lengths)}")
    return seqs


def corpus_codes(poles, corpus, alpha, lasso_iter=LASSO_ITER):
    """Lasso codes of every sequence and the mean objective."""
    seqs = _frames(corpus)
    if not seqs:
        return [], 0.0
    d = build_dictionary(poles, seqs[0].shape[0])
    codes = [encode_lasso(d, y, alpha=alpha, max_iter=lasso_iter).matrix for y in seqs]
    loss = np.mean([lasso_objective(d.matrix, y, c, alpha) for y, c in zip(seqs, codes)])
    return codes, float(loss)


def evaluate_dictionary(poles, heldout, alpha=0.1, lasso_iter=LASSO_ITER):
    """Mean ``L_dyn`` of ``heldout`` under ``poles``; 0 for an empty corpus."""
    return corpus_codes(poles, heldout, alpha, lasso_iter)[1]


def _atom_derivatives(poles, num_rows):
    """Per-pole derivatives of the raw atoms w.r.t. magnitude and phase.

    Returns two lists of ``T x c`` arrays (``c`` = 1 or 2 columns per pole),
    aligned with the pole's columns.
    """
    k = np.arange(num_rows, dtype=float)[:, None]
    d_mag, d_phase = [], []
    for m, th, kind in zip(poles.magnitudes, poles.phases, poles.kinds):
        rk = m ** k
        drk = k * m ** np.maximum(k - 1, 0)
        cos, sin = np.cos(k * th), np.sin(k * th)
        if kind == REAL:
            d_mag.append(drk * cos)
            d_phase.append(np.zeros_like(rk))
        else:
            d_mag.append(np.hstack([drk * cos, drk * sin]))
            d_phase.append(np.hstack([-k * rk * sin, k * rk * cos]))
    return d_mag, d_phase


def pole_gradient(poles, corpus, codes):
    """Gradient of the mean fixed-code objective w.r.t. (magnitudes, phases).

    Phase entries of real poles are zero.  The l1 term does not depend on the
    poles, so only the squared residual contributes.
    """
    seqs = _frames(corpus)
    t = seqs[0].shape[0]
    d = build_dictionary(poles, t).matrix
    # dL/dD averaged over the corpus
    g_d = np.zeros_like(d)
    for y, c in zip(seqs, codes):
        g_d -= 2.0 * (y - d @ c) @ c.T
    g_d /= len(seqs)
    owner = poles.column_owner()
    d_mag, d_phase = _atom_derivatives(poles, t)
    g_mag = np.zeros(len(poles))
    g_phase = np.zeros(len(poles))
    for i in range(len(poles)):
        cols = owner == i
        g_mag[i] = np.sum(g_d[:, cols] * d_mag[i])
        g_phase[i] = np.sum(g_d[:, cols] * d_phase[i])
    return g_mag, g_phase


def project_poles(poles, magnitudes, phases):
    """Clip to magnitude > 0 and complex phases inside ``[0, pi]``.

    Complex phases are kept a hair away from 0 and pi so that neither of a
    pole's two columns vanishes; real poles keep their phase.
    """
    mags = np.maximum(np.asarray(magnitudes, dtype=float), MIN_MAGNITUDE)
    ph = np.array(phases, dtype=float)
    cplx = np.array([k == COMPLEX for k in poles.kinds], dtype=bool)
    ph[cplx] = np.clip(ph[cplx], PHASE_EPS, np.pi - PHASE_EPS)
    ph[~cplx] = poles.phases[~cplx]
    return poles.replace(mags, ph)


def train_dictionary(
    init,
    corpus,
    alpha=0.1,
    epochs=50,
    lr=1e-3,
    max_backtracks=8,
    lasso_iter=LASSO_ITER,
    divergence=10.0,
):
    """Alternating lasso / pole-gradient training.

    Each epoch codes the corpus with the current poles (the same cold-start
    lasso as :func:`evaluate_dictionary`), takes a projected gradient step
    on ``log L`` (step ``lr``, i.e. ``lr / L`` on ``L``) on the poles with the
    codes fixed, and keeps the step only
    if the re-evaluated corpus loss does not increase; otherwise the step is
    halved up to ``max_backtracks`` times.  Set ``max_backtracks=0`` for plain
    steps.

    Returns
    -------
    poles : PoleSet
    trace : list of float
        Mean corpus ``L_dyn`` at the initial poles followed by one entry per
        epoch; ``trace[-1] == evaluate_dictionary(poles, corpus, alpha)``.

    Raises
    ------
    DivergenceError
        If the loss exceeds ``divergence`` times the initial loss.
    """
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    if lr < 0:
        raise ValueError("lr must be non-negative")
    seqs = _frames(corpus)
    if not seqs:
        raise ValueError("corpus is empty")
    poles = init
    codes, loss = corpus_codes(poles, seqs, alpha, lasso_iter)
    trace = [loss]
    limit = divergence * max(loss, np.finfo(float).tiny)
    for _ in range(epochs):
        if lr > 0:
            g_mag, g_phase = pole_gradient(poles, seqs, codes)
            # descend on log L so that lr does not depend on the data scale
            step = lr / max(loss, np.finfo(float).tiny)
            for _ in range(max_backtracks + 1):
                try:
                    trial = project_poles(poles, poles.magnitudes - step * g_mag, poles.phases - step * g_phase)
                except DuplicatePoleError:
                    # two poles clipped onto the same point; a shorter step keeps them apart
                    step *= 0.5
                    continue
                t_codes, t_loss = corpus_codes(trial, seqs, alpha, lasso_iter)
                if max_backtracks == 0 or t_loss <= loss:
                    poles, codes, loss = trial, t_codes, t_loss
                    break
                step *= 0.5
        trace.append(loss)
        if not np.isfinite(loss) or loss > limit:
            raise DivergenceError(f"training diverged: loss {loss:.6g} > {divergence} x initial", trace)
    return poles, trace


def dominant_pole(poles, corpus, alpha=0.1, lasso_iter=LASSO_ITER):
    """Stored pole carrying the most code energy over the corpus (as a complex number)."""
    codes, _ = corpus_codes(poles, corpus, alpha, lasso_iter)
    owner = poles.column_owner()
    energy = np.zeros(len(poles))
    for c in codes:
        for i in range(len(poles)):
            energy[i] += np.sum(c[owner == i] ** 2)
    return complex(poles.complex_poles()[int(np.argmax(energy))])
