import numpy as np
import pytest

from dynkeys.coding import SingularSystemError
from dynkeys.dictionary import PoleSet, build_dictionary, init_pole_ring
from dynkeys.online import OnlineState, init_online, predict_next, run_stream, step
from dynkeys.selection import SelectorConfig, select_keyframes
from dynkeys.synth import random_poles

SPARSE = SelectorConfig(lam=0.1)


def pole_track(p, num, cols=(1.0, -0.5)):
    """Closed-form rollout of a single complex pole: Re(c p^k) per column."""
    k = np.arange(num)[:, None]
    c = np.asarray(cols)[None, :] * np.exp(0.3j)
    return (c * p**k).real


def test_constant_prefix_one_key_frame_like_batch():
    d = build_dictionary(PoleSet([], [], include_constant_atom=True), 10)
    y = np.tile([[1.0, 2.0, 3.0]], (10, 1))
    state = init_online(d, y)
    assert state.selected == list(select_keyframes(d, y).indices)
    assert len(state.selected) == 1


def test_single_constant_key_frame_prediction():
    d = build_dictionary(PoleSet([], [], include_constant_atom=True), 4)
    state = OnlineState(d, [2], np.array([[5.0, -1.0]]))
    np.testing.assert_allclose(predict_next(state), [5.0, -1.0], rtol=1e-14)


def test_pure_pole_prediction_matches_rollout():
    p = 0.97 * np.exp(0.4j)
    d = build_dictionary(PoleSet([abs(p)], [np.angle(p)], include_constant_atom=False), 12)
    track = pole_track(p, 13)
    state = OnlineState(d, [3, 8], track[[3, 8]])
    pred = predict_next(state)
    assert np.linalg.norm(pred - track[12]) < 1e-6 * np.linalg.norm(track[12])


def test_all_frames_selected_predicts_next():
    rng = np.random.default_rng(0)
    poles = random_poles(rng, 3)
    d = build_dictionary(poles, 10)
    full = build_dictionary(poles, 11).matrix @ rng.standard_normal((poles.num_columns, 4))
    state = OnlineState(d, list(range(10)), full[:10])
    assert np.linalg.norm(predict_next(state) - full[10]) < 1e-6 * np.linalg.norm(full[10])


def test_prediction_needs_a_key_frame():
    d = build_dictionary(init_pole_ring(3, seed=0), 5)
    with pytest.raises(ValueError):
        predict_next(OnlineState(d, [], np.empty((0, 2))))


def test_dependent_key_rows(monkeypatch):
    d = build_dictionary(PoleSet([0.9], [0.0], include_constant_atom=False), 5)
    state = OnlineState(d, [0, 2], np.array([[1.0], [0.81]]), jitter=0.0)
    # jitter 0: dependent rows fall back to the pseudo-inverse code
    assert predict_next(state)[0] == pytest.approx(0.9**5, rel=1e-10)

    def singular(*args, **kwargs):
        raise SingularSystemError("singular")

    monkeypatch.setattr("dynkeys.online.min_norm_code", singular)
    state.jitter = 1e-12
    with pytest.raises(SingularSystemError):
        predict_next(state)


def test_exact_prediction_not_admitted_and_orthogonal_admitted():
    p = 0.95 * np.exp(0.6j)
    d = build_dictionary(PoleSet([abs(p)], [np.angle(p)], include_constant_atom=False), 6)
    track = pole_track(p, 8)
    state = OnlineState(d, [0, 5], track[[0, 5]].copy())
    state, admitted = step(state, predict_next(state))
    assert not admitted and state.selected == [0, 5]
    pred = predict_next(state)
    orth = 1e3 * np.array([-pred[1], pred[0]])
    state, admitted = step(state, orth)
    assert admitted and state.selected == [0, 5, 7]
    np.testing.assert_array_equal(state.key_rows[-1], orth)


def test_dictionary_grows_one_row_per_step_and_history():
    rng = np.random.default_rng(1)
    d = build_dictionary(init_pole_ring(10, seed=1), 8)
    y = rng.standard_normal((14, 3))
    state = init_online(d, y[:8], SPARSE)
    for k in range(8, 14):
        before = list(state.selected)
        state, admitted = step(state, y[k])
        assert state.num_frames == k + 1
        rec = state.history[-1]
        assert rec["frame"] == k and rec["admitted"] == admitted and rec["residual"] >= 0
        assert state.selected == (before + [k] if admitted else before)
        assert state.key_rows.shape == (len(state.selected), 3)
        np.testing.assert_array_equal(state.key_rows, y[state.selected])
    assert all(a < b for a, b in zip(state.selected, state.selected[1:]))


def test_zero_prefix_then_every_nonzero_frame_admitted():
    rng = np.random.default_rng(2)
    d = build_dictionary(init_pole_ring(20, seed=2), 10)
    state = init_online(d, np.zeros((10, 3)))
    assert state.selected == []
    for k in range(6):
        state, admitted = step(state, rng.standard_normal(3))
        assert admitted
    assert state.selected == list(range(10, 16))


def test_tau_limits():
    rng = np.random.default_rng(3)
    poles = random_poles(rng, 2)
    y = build_dictionary(poles, 30).matrix @ rng.standard_normal((poles.num_columns, 4))
    y = y + 1e-3 * rng.standard_normal(y.shape)
    d = build_dictionary(init_pole_ring(40, seed=3), 30)
    low = run_stream(d, y, 20, SPARSE, tau=1e-12)
    assert all(h["admitted"] for h in low.history)
    high = run_stream(d, y, 20, SPARSE, tau=1e12)
    assert not any(h["admitted"] for h in high.history)


def test_non_finite_and_mismatched_input():
    d = build_dictionary(init_pole_ring(4, seed=0), 6)
    state = init_online(d, np.ones((6, 2)))
    with pytest.raises(ValueError, match="non-finite"):
        step(state, [np.nan, 1.0])
    with pytest.raises(ValueError, match="features"):
        step(state, [1.0, 2.0, 3.0])


def test_init_preconditions():
    d = build_dictionary(init_pole_ring(4, seed=0), 6)
    with pytest.raises(ValueError):
        init_online(d, np.ones((1, 2)))
    with pytest.raises(ValueError):
        init_online(d, np.ones((6, 2)), tau=0.0)


def test_prefix_longer_or_shorter_than_dictionary():
    rng = np.random.default_rng(4)
    d = build_dictionary(init_pole_ring(8, seed=4), 10)
    y = rng.standard_normal((14, 2))
    assert init_online(d, y).num_frames == 14
    assert init_online(d, y[:6]).num_frames == 6


def test_deterministic_admissions():
    rng = np.random.default_rng(5)
    d = build_dictionary(init_pole_ring(20, seed=5), 30)
    y = rng.standard_normal((30, 3))
    a = run_stream(d, y, 15, SPARSE)
    b = run_stream(d, y, 15, SPARSE)
    assert a.history == b.history and a.selected == b.selected


def test_zero_online_steps_equals_batch():
    rng = np.random.default_rng(6)
    poles = random_poles(rng, 2)
    d = build_dictionary(poles, 20)
    y = d.matrix @ rng.standard_normal((poles.num_columns, 3))
    state = run_stream(d, y, 20, SPARSE)
    assert state.selected == list(select_keyframes(d, y, SPARSE).indices)


@pytest.mark.parametrize("tau", [0.05, 0.15, 0.3, 0.6])
@pytest.mark.parametrize("seed", range(5))
def test_admission_at_dynamics_change(seed, tau):
    # calibrated band: for these tau the first admission is the change frame
    rng = np.random.default_rng(seed)
    a = random_poles(rng, 2)
    b = random_poles(rng, 2, include_constant_atom=False)
    both = PoleSet(np.r_[a.magnitudes, b.magnitudes], np.r_[a.phases, b.phases])
    d = build_dictionary(both, 40)
    first = build_dictionary(a, 25).matrix @ rng.standard_normal((5, 6))
    second = build_dictionary(b, 15).matrix @ rng.standard_normal((4, 6))
    state = run_stream(d, np.vstack([first, second]), 20, SPARSE, tau=tau)
    admitted = [h["frame"] for h in state.history if h["admitted"]]
    assert admitted and 25 <= admitted[0] <= 27
