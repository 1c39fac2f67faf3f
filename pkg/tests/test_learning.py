import numpy as np
import pytest

from dynkeys.dictionary import PoleSet, build_dictionary, init_pole_ring
from dynkeys.learning import (
    DivergenceError,
    corpus_codes,
    dominant_pole,
    evaluate_dictionary,
    pole_gradient,
    project_poles,
    train_dictionary,
)
from dynkeys.synth import random_poles


def fixed_code_loss(poles, seqs, codes):
    d = build_dictionary(poles, seqs[0].shape[0]).matrix
    return np.mean([np.sum((y - d @ c) ** 2) for y, c in zip(seqs, codes)])


@pytest.mark.parametrize("seed", range(10))
def test_pole_gradient_matches_central_differences(seed):
    rng = np.random.default_rng(seed)
    poles = PoleSet(
        np.r_[init_pole_ring(3, seed=seed).magnitudes, 0.93],
        np.r_[init_pole_ring(3, seed=seed).phases, 0.0],
    )
    seqs = [rng.standard_normal((12, 3)) for _ in range(2)]
    codes = [rng.standard_normal((poles.num_columns, 3)) for _ in range(2)]
    g_mag, g_phase = pole_gradient(poles, seqs, codes)
    h = 1e-6
    for j in range(len(poles)):
        e = np.zeros(len(poles))
        e[j] = h
        fd = (fixed_code_loss(poles.replace(poles.magnitudes + e), seqs, codes)
              - fixed_code_loss(poles.replace(poles.magnitudes - e), seqs, codes)) / (2 * h)
        assert abs(fd - g_mag[j]) <= 1e-4 * max(abs(fd), 1e-8)
        if poles.kinds[j] == "complex":
            fd = (fixed_code_loss(poles.replace(phases=poles.phases + e), seqs, codes)
                  - fixed_code_loss(poles.replace(phases=poles.phases - e), seqs, codes)) / (2 * h)
            assert abs(fd - g_phase[j]) <= 1e-4 * max(abs(fd), 1e-8)
        else:
            assert g_phase[j] == 0.0


def test_zero_learning_rate_keeps_poles():
    rng = np.random.default_rng(0)
    init = init_pole_ring(4, seed=0)
    seqs = [rng.standard_normal((10, 2)) for _ in range(3)]
    poles, trace = train_dictionary(init, seqs, epochs=5, lr=0.0)
    assert poles == init
    assert len(trace) == 6 and len(set(trace)) == 1


def test_generating_poles_trace_non_increasing():
    rng = np.random.default_rng(1)
    init = random_poles(rng, 2)
    d = build_dictionary(init, 16).matrix
    seqs = [d @ rng.standard_normal((init.num_columns, 3)) for _ in range(4)]
    poles, trace = train_dictionary(init, seqs, epochs=10)
    assert np.all(np.diff(trace) <= 0)
    assert trace[-1] <= trace[0]
    assert trace[-1] == evaluate_dictionary(poles, seqs)


def grid_optimum(y, center, alpha, radius=0.08, n=33):
    """Brute-force the single-pole objective on a square grid around ``center``."""
    best, arg = np.inf, None
    for dm in np.linspace(-radius, radius, n):
        for dp in np.linspace(-radius, radius, n):
            p = PoleSet([abs(center) + dm], [np.angle(center) + dp], include_constant_atom=False)
            val = evaluate_dictionary(p, [y], alpha)
            if val < best:
                best, arg = val, p.complex_poles()[0]
    return arg


@pytest.mark.parametrize("seed", range(3))
def test_single_pole_recovery(seed):
    rng = np.random.default_rng(seed)
    m, th = rng.uniform(0.92, 1.02), rng.uniform(0.5, 2.5)
    hidden = m * np.exp(1j * th)
    y = build_dictionary(PoleSet([m], [th], include_constant_atom=False), 20).matrix @ rng.standard_normal((2, 3))
    ang = 2 * np.pi * seed / 3 + 0.4
    init = PoleSet([m + 0.06 * np.cos(ang)], [th + 0.06 * np.sin(ang)], include_constant_atom=False)
    poles, trace = train_dictionary(init, [y], alpha=0.1, epochs=100)
    learned = poles.complex_poles()[0]
    assert abs(learned - hidden) < 0.05
    # the grid search locates (nearly) the same optimum
    assert abs(grid_optimum(y, hidden, 0.1, n=17) - learned) < 0.05
    assert trace[-1] < trace[0]


def test_dominant_pole_picks_the_generator():
    rng = np.random.default_rng(2)
    hidden = PoleSet([0.97], [1.1], include_constant_atom=False)
    decoy = PoleSet([0.97, 0.9], [1.1, 2.6], include_constant_atom=False)
    y = build_dictionary(hidden, 20).matrix @ rng.standard_normal((2, 3))
    assert abs(dominant_pole(decoy, [y]) - 0.97 * np.exp(1.1j)) < 1e-12


def test_evaluate_empty_and_train_equals_heldout():
    assert evaluate_dictionary(init_pole_ring(3, seed=0), []) == 0.0
    rng = np.random.default_rng(3)
    seqs = [rng.standard_normal((8, 2)) for _ in range(3)]
    poles, trace = train_dictionary(init_pole_ring(4, seed=3), seqs, epochs=3)
    assert evaluate_dictionary(poles, seqs) == trace[-1]
    codes, loss = corpus_codes(poles, seqs, 0.1)
    assert loss == trace[-1] and len(codes) == 3


def test_projection_invariants():
    poles = PoleSet([0.9, 1.0, 0.8], [1.0, 2.0, 0.0])
    out = project_poles(poles, [-1.0, 1.2, 0.7], [-0.5, 4.0, 1.0])
    assert np.all(out.magnitudes > 0)
    assert 0 < out.phases[0] < np.pi and 0 < out.phases[1] < np.pi
    assert out.phases[2] == 0.0 and out.kinds == poles.kinds
    assert out.include_constant_atom


def test_trained_poles_stay_valid():
    rng = np.random.default_rng(4)
    seqs = [np.cumsum(rng.standard_normal((12, 2)), axis=0) for _ in range(3)]
    poles, _ = train_dictionary(init_pole_ring(5, seed=4), seqs, epochs=5, lr=0.5)
    assert np.all(poles.magnitudes > 0)
    assert np.all((poles.phases >= 0) & (poles.phases <= np.pi))


def test_divergence_aborts_with_trace():
    rng = np.random.default_rng(5)
    init = random_poles(rng, 2)
    d = build_dictionary(init, 12).matrix
    seqs = [10 * d @ rng.standard_normal((init.num_columns, 2)) for _ in range(2)]
    # a well-fitting start; max_backtracks=0 accepts any step and a huge rate wrecks the fit
    with pytest.raises(DivergenceError) as info:
        train_dictionary(init, seqs, epochs=20, lr=1e3, max_backtracks=0)
    assert len(info.value.trace) >= 2
    assert info.value.trace[-1] > 10 * info.value.trace[0]


def test_argument_checks():
    seqs = [np.ones((6, 2)), np.ones((7, 2))]
    with pytest.raises(ValueError, match="frame count"):
        train_dictionary(init_pole_ring(2, seed=0), seqs)
    with pytest.raises(ValueError):
        train_dictionary(init_pole_ring(2, seed=0), [np.ones((6, 2))], epochs=0)
    with pytest.raises(ValueError):
        train_dictionary(init_pole_ring(2, seed=0), [np.ones((6, 2))], lr=-1.0)
    with pytest.raises(ValueError):
        train_dictionary(init_pole_ring(2, seed=0), [])
