import math
import pickle

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from vqr.circuits import AnsatzSpec, FeatureMapSpec
from vqr.optimizers import OptimizerSpec
from vqr.regressor import VQRegressor, evaluate, load_model, mse_cost, save_model, train

import oracle


def toy(n=2, m=30, seed=0):
    rng = np.random.default_rng(seed)
    u = rng.uniform(size=(m, n))
    return u * math.pi / 2, u.mean(axis=1)


def test_zero_angles_zero_input_predicts_half():
    # one feature-map repetition, so the encoded state is (H x H)|00>
    model = VQRegressor(feature_map_reps=1, ansatz_reps=1).set_trained_parameters(np.zeros(4), 2)
    assert model.predict([[0.0, 0.0]])[0] == pytest.approx(0.5, abs=1e-15)


def test_single_qubit_prediction_matches_dense_oracle():
    model = VQRegressor(feature_map_reps=1, ansatz="TwoLocal", ansatz_reps=1)
    model.set_trained_parameters([math.pi, 0.4], 1)
    for x in (0.0, 0.3, 1.2):
        gates = [("H", (0,), None), ("P", (0,), 2 * x), ("RY", (0,), math.pi), ("RY", (0,), 0.4)]
        expected = (oracle.z_expectation(oracle.run(gates, 1), 1) + 1) / 2
        assert model.predict([[x]])[0] == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("fm,ent,ansatz,a_ent", [
    ("ZZFeatureMap", "circular", "EfficientSU2", "sca"),
    ("ZFeatureMap", None, "PauliTwoDesign", None),
    ("ZZFeatureMap", "full", "RealAmplitudes", "pairwise"),
])
def test_three_qubit_predictions_match_dense_oracle(fm, ent, ansatz, a_ent):
    from vqr.circuits import build_ansatz, build_feature_map

    model = VQRegressor(feature_map=fm, feature_map_entanglement=ent, feature_map_reps=2,
                        ansatz=ansatz, entanglement=a_ent, ansatz_reps=2, random_state=5)
    n = 3
    theta = np.random.default_rng(1).uniform(-3, 3, model.ansatz_spec(n).num_parameters)
    model.set_trained_parameters(theta, n)
    x = np.array([0.2, 1.0, 1.4])
    bind = {f"x[{i}]": x[i] for i in range(n)}
    bind.update({f"theta[{k}]": theta[k] for k in range(theta.size)})
    gates = []
    for circ in (build_feature_map(model.feature_map_spec(n)), build_ansatz(model.ansatz_spec(n))):
        for g in circ.gates:
            gates.append((g.kind, g.qubits, None if g.angle is None else float(g.bound_angle(bind))))
    expected = (oracle.z_expectation(oracle.run(gates, n), n) + 1) / 2
    assert model.predict(x[None])[0] == pytest.approx(expected, abs=1e-12)


def test_cost_examples():
    assert mse_cost([0.1, 0.7], [0.1, 0.7]) == 0
    assert mse_cost([0.5] * 4, [0, 1, 0, 1]) == 0.25
    assert mse_cost([0.2], [0.5]) == pytest.approx(0.09, abs=1e-15)
    with pytest.raises(ValueError):
        mse_cost([], [])


def test_evaluate_examples():
    class Fixed:
        def __init__(self, out):
            self.out = np.asarray(out, float)

        def predict(self, X):
            return self.out

    assert evaluate(Fixed([0.5, 0.5]), [[0.0], [1.0]], [0.0, 1.0]) == (0.25, 0.5)
    assert evaluate(Fixed([0.3, 0.8]), [[0.0], [1.0]], [0.3, 0.8]) == (0.0, 0.0)


def test_training_reduces_cost_and_is_deterministic():
    X, y = toy()
    a = VQRegressor(ansatz_reps=2, max_iter=40, random_state=3).fit(X, y)
    b = VQRegressor(ansatz_reps=2, max_iter=40, random_state=3).fit(X, y)
    rep = a.train_report_
    assert rep.final_cost < rep.initial_cost
    np.testing.assert_array_equal(a.trained_parameters_, b.trained_parameters_)
    assert evaluate(a, X, y) == evaluate(b, X, y)


def test_initial_angles_uniform_in_pi_range():
    X, y = toy()
    model = VQRegressor(ansatz_reps=5, max_iter=0, random_state=11).fit(X, y)
    theta0 = model.train_report_.initial_parameters
    assert np.all(np.abs(theta0) <= math.pi)
    np.testing.assert_array_equal(theta0, np.random.default_rng(11).uniform(-math.pi, math.pi, theta0.size))


def test_zero_budget_keeps_initial_parameters():
    X, y = toy()
    model = VQRegressor(max_iter=0, random_state=2).fit(X, y)
    rep = model.train_report_
    np.testing.assert_array_equal(model.trained_parameters_, rep.initial_parameters)
    assert rep.final_cost == rep.initial_cost


def test_constant_target_does_not_increase_cost():
    X, _ = toy()
    y = np.full(len(X), 0.5)
    rep = VQRegressor(max_iter=20).fit(X, y).train_report_
    assert rep.final_cost <= rep.initial_cost


@pytest.mark.parametrize("opt", ["COBYLA", "NelderMead"])
def test_other_optimizers_train(opt):
    X, y = toy(m=20)
    rep = VQRegressor(optimizer=opt, ansatz_reps=1, max_iter=30).fit(X, y).train_report_
    assert rep.final_cost <= rep.initial_cost


def test_dimension_mismatch():
    X, y = toy()
    with pytest.raises(ValueError):
        VQRegressor(num_qubits=3).fit(X, y)
    model = VQRegressor(max_iter=1).fit(X, y)
    with pytest.raises(ValueError):
        model.predict(np.zeros((1, 3)))


def test_train_function_and_qubit_check():
    X, y = toy()
    model, report = train(FeatureMapSpec("ZFeatureMap", 2), AnsatzSpec("RealAmplitudes", 2, 1),
                          OptimizerSpec("SPSA", max_iterations=10, seed=1), X, y, seed=1)
    assert report.final_cost <= report.initial_cost
    assert model.trained_parameters_.size == 4
    with pytest.raises(ValueError):
        train(FeatureMapSpec("ZFeatureMap", 2), AnsatzSpec("RealAmplitudes", 3, 1),
              OptimizerSpec("SPSA"), X, y)


def test_save_load_round_trip(tmp_path):
    X, y = toy(n=3)
    model = VQRegressor(feature_map="ZZFeatureMap", ansatz="PauliTwoDesign", max_iter=5, random_state=8).fit(X, y)
    save_model(model, tmp_path / "m.json")
    back = load_model(tmp_path / "m.json")
    np.testing.assert_array_equal(back.trained_parameters_, model.trained_parameters_)
    np.testing.assert_array_equal(back.predict(X), model.predict(X))


def test_sklearn_api():
    model = VQRegressor(ansatz="EfficientSU2", max_iter=7)
    params = model.get_params()
    assert params["ansatz"] == "EfficientSU2" and params["max_iter"] == 7
    twin = clone(model)
    assert twin.get_params() == params
    X, y = toy()
    fitted = model.fit(X, y)
    score = fitted.score(X, y)
    assert np.isfinite(score) and score <= 1.0
    restored = pickle.loads(pickle.dumps(fitted))
    np.testing.assert_array_equal(restored.predict(X), fitted.predict(X))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), x=st.lists(st.floats(-10, 10), min_size=2, max_size=2))
def test_prediction_always_in_unit_interval(seed, x):
    model = VQRegressor(feature_map="ZZFeatureMap", ansatz_reps=2)
    theta = np.random.default_rng(seed).uniform(-10, 10, model.ansatz_spec(2).num_parameters)
    model.set_trained_parameters(theta, 2)
    p = model.predict([x])[0]
    assert 0.0 <= p <= 1.0


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_cost_permutation_invariant_and_metric_bounds(seed):
    X, y = toy(m=12, seed=seed)
    model = VQRegressor(ansatz_reps=1)
    theta = np.random.default_rng(seed).uniform(-3, 3, 4)
    perm = np.random.default_rng(seed + 1).permutation(len(y))
    assert model.cost(theta, X, y) == pytest.approx(model.cost(theta, X[perm], y[perm]), rel=1e-13)
    model.set_trained_parameters(theta, 2)
    mse, mae = evaluate(model, X, y)
    err = np.abs(model.predict(X) - y)
    assert mae ** 2 <= mse + 1e-15
    assert mse <= err.max() * mae + 1e-15
