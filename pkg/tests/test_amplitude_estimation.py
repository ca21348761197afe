import numpy as np
import pytest

from cqgm.amplitude_estimation import (AEEstimate, AEOperator, Schedule, bernoulli_operator, estimate,
                                       good_probabilities, grover_iterate, mle_estimate, qft_ops,
                                       qpe_reference, run_schedule, schedule_make)
from cqgm.statevector import Circuit, QuantumState, cry, cx, mcry, run, ry


def random_operator(rng, n_data=3):
    """Random real-amplitude loader on ``n_data`` qubits plus a payoff rotation onto the objective."""
    ops = [ry(float(rng.uniform(-np.pi, np.pi)), q) for q in range(n_data)]
    for q in range(n_data - 1):
        ops.append(cx(q, q + 1))
    ops += [ry(float(rng.uniform(-np.pi, np.pi)), q) for q in range(n_data)]
    obj = n_data
    ops.append(ry(float(rng.uniform(0, np.pi)), obj))
    ops.append(cry(float(rng.uniform(-1, 1)), 0, obj))
    ops.append(mcry(float(rng.uniform(-1, 1)), obj, list(range(1, n_data)), [1] * (n_data - 1)))
    return AEOperator(Circuit(n_data + 1, ops), obj)


def test_grover_closed_form_random_operators():
    rng = np.random.default_rng(0)
    powers = list(range(9))
    for _ in range(50):
        op = random_operator(rng)
        theta = np.arcsin(np.sqrt(op.amplitude()))
        got = good_probabilities(op, powers)
        assert np.abs(got - np.sin((2 * np.array(powers) + 1) * theta) ** 2).max() < 1e-9


def test_grover_single_iterate_and_zero_amplitude():
    op = bernoulli_operator(0.3)
    theta = np.arcsin(np.sqrt(0.3))
    s = run(grover_iterate(op), op.prepared())
    assert abs(s.amplitudes[1]) ** 2 == pytest.approx(np.sin(3 * theta) ** 2, abs=1e-12)
    assert np.allclose(good_probabilities(bernoulli_operator(0.0), range(5)), 0, atol=1e-15)


def test_schedule_definitions():
    assert schedule_make("EIS", 5).powers.tolist() == [0, 1, 2, 4, 8]
    assert schedule_make("LIS", 4).powers.tolist() == [0, 1, 2, 3]
    assert schedule_make("PowerLaw", 4, beta=2).powers.tolist() == [0, 1, 4, 9]
    s = schedule_make("EIS", 3, shots=50)
    assert s.shots.tolist() == [50] * 3 and s.oracle_calls == 50 * (1 + 3 + 5)
    with pytest.raises(ValueError):
        schedule_make("EIS", 0)
    with pytest.raises(ValueError):
        Schedule(((2, 10), (1, 10)), "LIS")
    with pytest.raises(ValueError):
        Schedule(((0, 0),))


def test_run_schedule_extremes_and_bands():
    sched = schedule_make("LIS", 5, shots=100)
    assert np.array_equal(run_schedule(bernoulli_operator(1.0), sched, seed=1), sched.shots)
    assert np.all(run_schedule(bernoulli_operator(0.0), sched, seed=1) == 0)
    hits = run_schedule(bernoulli_operator(0.3), sched, seed=2)
    p = np.sin((2 * sched.powers + 1) * np.arcsin(np.sqrt(0.3))) ** 2
    assert np.all(np.abs(hits - 100 * p) <= 4 * np.sqrt(100 * p * (1 - p)) + 1e-9)


def test_exact_mode_recovers_truth():
    assert estimate(bernoulli_operator(0.5), Schedule(((0, 100),)), exact=True).a_hat == pytest.approx(0.5, abs=1e-9)
    assert estimate(bernoulli_operator(0.3), schedule_make("EIS", 5), exact=True).a_hat == pytest.approx(0.3, abs=1e-6)
    rng = np.random.default_rng(3)
    for _ in range(100):
        a = float(rng.uniform(0.01, 0.99))
        sched = schedule_make(str(rng.choice(["LIS", "EIS", "PowerLaw"])), int(rng.integers(1, 6)), shots=100)
        assert estimate(bernoulli_operator(a), sched, exact=True).a_hat == pytest.approx(a, abs=1e-6)


def test_degenerate_hits_flagged():
    sched = schedule_make("EIS", 3)
    e0 = mle_estimate(np.zeros(3), sched)
    assert e0.degenerate and e0.a_hat < 1e-6
    e1 = mle_estimate(sched.shots.astype(float), sched)
    assert e1.degenerate


def test_invalid_hits_rejected():
    with pytest.raises(ValueError):
        mle_estimate([1, 2], schedule_make("EIS", 3))
    with pytest.raises(ValueError):
        mle_estimate([101, 0, 0], schedule_make("EIS", 3))


def test_permuting_entries_leaves_estimate_unchanged():
    sched = schedule_make("EIS", 5, shots=100)
    hits = run_schedule(bernoulli_operator(0.37), sched, seed=4)
    order = [3, 0, 4, 1, 2]
    shuffled = Schedule(tuple(sched.entries[i] for i in order))
    assert mle_estimate(hits[order], shuffled).a_hat == pytest.approx(mle_estimate(hits, sched).a_hat, abs=1e-9)


def test_estimate_json_round_trip():
    est = estimate(bernoulli_operator(0.25), schedule_make("EIS", 4), seed=5)
    text = est.to_json()
    again = AEEstimate.from_json(text)
    assert again.to_json() == text
    lo, hi = est.confidence_interval()
    assert lo <= est.a_hat <= hi


def test_qft_matches_dft():
    n = 3
    rng = np.random.default_rng(6)
    v = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    v /= np.linalg.norm(v)
    out = run(Circuit(n, qft_ops(range(n))), QuantumState(n, v)).amplitudes
    assert np.allclose(out, np.fft.ifft(v) * np.sqrt(8), atol=1e-12)
    back = run(Circuit(n, qft_ops(range(n), inverse=True)), QuantumState(n, out)).amplitudes
    assert np.allclose(back, v, atol=1e-12)


def test_qpe_grid_aligned_and_error_bound():
    a_hat, dist = qpe_reference(bernoulli_operator(np.sin(np.pi / 4) ** 2), 3)
    assert a_hat == pytest.approx(0.5, abs=1e-12)
    assert dist.sum() == pytest.approx(1)
    rng = np.random.default_rng(7)
    for _ in range(10):
        a = float(rng.uniform(0, 1))
        a_hat, _ = qpe_reference(bernoulli_operator(a), 6)
        assert abs(a_hat - a) <= np.pi / 2 ** 6


def test_qpe_agrees_with_mlae():
    rng = np.random.default_rng(8)
    for _ in range(20):
        op = random_operator(rng, 2)
        a = op.amplitude()
        q, _ = qpe_reference(op, 5)
        m = estimate(op, schedule_make("EIS", 5, shots=200), seed=int(rng.integers(1 << 30))).a_hat
        assert abs(q - m) <= np.pi / 2 ** 5 + 0.05
        assert abs(m - a) <= 0.05
