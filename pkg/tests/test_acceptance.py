"""Acceptance criteria, each checked at its stated tolerance.

Every test records one PASS/FAIL line (shown in the pytest terminal summary,
or directly when run as ``python tests/test_acceptance.py``).
"""

import math
import os
import statistics
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from vqr.circuits import Entanglement, basis_encode, entanglement_pairs
from vqr.data import AngleScaler, fit_pca, jacobi_eigh, load_csv, prepare, transform
from vqr.optimizers import OptimizerSpec, minimize
from vqr.regressor import VQRegressor, evaluate
from vqr.sim import Circuit, run_circuit
from vqr.sweep import GridSpec, enumerate_grid, read_results_csv, render_table, run_sweep, top_k

import golden
import oracle
from acceptance_log import record
from bike_like import TARGET, write_bike_like
from test_data import symmetric_3x3_eigenvalues

HERE = Path(__file__).parent
REAL_FILE_CANDIDATES = [
    os.environ.get("VQR_BIKE_CSV", ""),
    HERE.parent / "data" / "SeoulBikeData.csv",
    HERE / "data" / "SeoulBikeData.csv",
]


def real_bike_file():
    for cand in REAL_FILE_CANDIDATES:
        if cand and Path(cand).is_file():
            return Path(cand)
    return None


def criterion(number, passed, detail):
    record(number, passed, detail)
    assert passed, detail


def test_criterion_01_oracle_equivalence():
    rng = np.random.default_rng(2024)
    start = time.monotonic()
    worst, kinds = 0.0, set()
    for _ in range(500):
        n = int(rng.integers(1, 6))
        gates = oracle.random_gates(rng, n, int(rng.integers(1, 31)))
        kinds.update(g[0] for g in gates)
        circ = Circuit(n)
        for kind, qubits, theta in gates:
            circ.add(kind, *qubits, angle=theta)
        worst = max(worst, float(np.max(np.abs(run_circuit(circ).data - oracle.run(gates, n)))))
    elapsed = time.monotonic() - start
    ok = worst < 1e-9 and elapsed < 60 and kinds == set(oracle.KINDS)
    criterion(1, ok, f"500 circuits, max |diff| {worst:.2e} (< 1e-9), {elapsed:.1f}s (< 60s), "
                     f"{len(kinds)}/8 gate kinds")


def test_criterion_02_normalization():
    rng = np.random.default_rng(99)
    worst = 0.0
    for _ in range(500):
        n = int(rng.integers(1, 6))
        circ = Circuit(n)
        for kind, qubits, theta in oracle.random_gates(rng, n, int(rng.integers(1, 31))):
            circ.add(kind, *qubits, angle=theta)
        worst = max(worst, abs(run_circuit(circ).norm_squared() - 1.0))
    criterion(2, worst < 1e-10, f"max | ||psi||^2 - 1 | = {worst:.2e} (< 1e-10)")


def test_criterion_03_entanglement_golden_tables():
    mismatches = [
        (n, s.value, r)
        for n in range(2, 9) for s in Entanglement for r in range(4)
        if entanglement_pairs(n, s, r) != golden.table(n, s.value, r)
    ]
    criterion(3, not mismatches, f"{7 * 5 * 4} tables (n 2..8, 5 strategies, rep 0..3), mismatches {mismatches}")


def test_criterion_04_basis_encoding():
    psi = basis_encode(5, 3)
    expected = np.zeros(8, dtype=complex)
    expected[0b101] = 1.0
    criterion(4, bool(np.array_equal(psi.data, expected)), "basis_encode(5, 3) == |101> exactly")


def test_criterion_05_optimizer_suite():
    start = time.monotonic()
    rosen = lambda x: float(100 * (x[1] - x[0] ** 2) ** 2 + (1 - x[0]) ** 2)
    sphere = lambda x: float(np.sum(np.asarray(x) ** 2))
    nm = minimize(rosen, [-1.2, 1.0], OptimizerSpec("NelderMead", max_iterations=2000))
    nm_err = float(np.max(np.abs(nm.best_x - 1.0)))
    cob = minimize(sphere, np.ones(4), OptimizerSpec("COBYLA")).best_f
    spsa = statistics.median(
        minimize(sphere, np.ones(4), OptimizerSpec("SPSA", max_iterations=500, seed=s)).best_f
        for s in range(20)
    )
    elapsed = time.monotonic() - start
    ok = nm_err < 1e-3 and nm.iterations <= 2000 and cob < 1e-6 and spsa < 1e-2 and elapsed < 120
    criterion(5, ok, f"NM Rosenbrock |x-(1,1)| {nm_err:.1e} in {nm.iterations} it; COBYLA sphere {cob:.1e}; "
                     f"SPSA median {spsa:.1e}; {elapsed:.1f}s")


def test_criterion_06_pca_properties():
    rng = np.random.default_rng(6)
    x = rng.normal(size=(200, 6)) @ rng.normal(size=(6, 6))
    basis = fit_pca(x, 6)
    ortho = float(np.max(np.abs(basis.components.T @ basis.components - np.eye(6))))
    recon = float(np.max(np.abs(transform(basis, x) @ basis.components.T + basis.mean - x)))
    eig = 0.0
    for _ in range(100):
        b = rng.normal(size=(3, 3))
        a = b + b.T
        eig = max(eig, float(np.max(np.abs(jacobi_eigh(a)[0] - symmetric_3x3_eigenvalues(a)))))
    ok = ortho < 1e-8 and recon < 1e-8 and eig < 1e-8
    criterion(6, ok, f"orthonormality {ortho:.1e}, round trip {recon:.1e}, 3x3 eigenvalues {eig:.1e} (all < 1e-8)")


def test_criterion_07_end_to_end_training():
    start = time.monotonic()
    ratios, rel_mse = [], []
    for seed in range(5):
        rng = np.random.default_rng(100 + seed)
        u = rng.uniform(size=(60, 3))
        y = u.mean(axis=1)
        scaler = AngleScaler().fit(u[:40])
        x_tr, x_te = scaler.transform(u[:40]), scaler.transform(u[40:])
        model = VQRegressor(ansatz="RealAmplitudes", entanglement="linear",
                            optimizer=OptimizerSpec("SPSA", max_iterations=100, seed=seed),
                            random_state=seed).fit(x_tr, y[:40])
        rep = model.train_report_
        mse, _ = evaluate(model, x_te, y[40:])
        ratios.append(rep.final_cost / rep.initial_cost)
        rel_mse.append(mse / np.var(y[40:]))
    elapsed = time.monotonic() - start
    r, m = statistics.median(ratios), statistics.median(rel_mse)
    ok = r <= 0.5 and m < 1.0 and elapsed < 300
    criterion(7, ok, f"median final/initial cost {r:.3f} (<= 0.5), median test MSE / var(y) {m:.3f} (< 1), "
                     f"{elapsed:.1f}s")


@pytest.mark.slow
def test_criterion_08_table1_fixture_and_reduced_grid(tmp_path):
    start = time.monotonic()
    rows = top_k(read_results_csv(HERE / "fixtures" / "table1.csv"), "mse", 5)
    order = [(r.ansatz_name, r.optimizer_name, r.feature_map_name, r.entanglement, r.mse) for r in rows]
    fixture_ok = order == [
        ("EfficientSU2", "SPSA", "ZFeatureMap", "circular", 0.0209),
        ("RealAmplitudes", "SPSA", "ZFeatureMap", "full", 0.0219),
        ("TwoLocal", "SPSA", "ZFeatureMap", "sca", 0.0227),
        ("EfficientSU2", "SPSA", "ZFeatureMap", "full", 0.0229),
        ("TwoLocal", "SPSA", "ZFeatureMap", "linear", 0.0245),
    ]
    print(render_table(rows))

    real = real_bike_file()
    source = "real file" if real else "synthetic bike-like surrogate"
    path = real or write_bike_like(tmp_path / "bike.csv")
    dataset = prepare(load_csv(path, TARGET), 4)
    grid = GridSpec(
        feature_maps=["ZFeatureMap", "ZZFeatureMap"], feature_map_entanglements=["linear"],
        ansatzes=["RealAmplitudes", "EfficientSU2"], ansatz_entanglements=["linear"],
        optimizers=["SPSA", "COBYLA", "NelderMead"], qubits=4, max_iterations=50,
        repeats=3, n_train=100, n_test=50, base_seed=0,
    )
    results = run_sweep(grid, dataset, tmp_path / "sweep", parallelism=min(4, os.cpu_count() or 1))
    by_opt = {}
    for r in results:
        if r.ok:
            by_opt.setdefault(r.optimizer_name, []).append(r.mse)
    means = {k: float(np.mean(v)) for k, v in by_opt.items()}
    gap = means["NelderMead"] - means["SPSA"]
    soft = "holds" if gap >= 0 else "does NOT hold"
    elapsed = time.monotonic() - start
    all_ok = len(results) == 36 and all(r.ok for r in results)
    ok = fixture_ok and all_ok and elapsed < 45 * 60
    detail = (f"Table 1 order reproduced={fixture_ok}; reduced grid ({source}) 36 trials ok={all_ok}; "
              f"mean MSE SPSA {means['SPSA']:.4f}, COBYLA {means['COBYLA']:.4f}, NelderMead "
              f"{means['NelderMead']:.4f}; soft check NM >= SPSA {soft} (gap {gap:+.4f}); {elapsed:.0f}s")
    criterion(8, ok, detail)


def test_criterion_09_sweep_determinism(tmp_path):
    rng = np.random.default_rng(9)
    u = rng.uniform(size=(60, 3))
    from vqr.data import NumericDataset

    dataset = NumericDataset(u * math.pi / 2, u.mean(axis=1))
    grid = GridSpec(
        feature_maps=["ZFeatureMap", "ZZFeatureMap"], feature_map_entanglements=["linear"],
        ansatzes=["RealAmplitudes", "PauliTwoDesign"], ansatz_entanglements=["linear"],
        optimizers=["SPSA", "COBYLA", "NelderMead"], qubits=3, max_iterations=10,
        feature_map_reps=[1], ansatz_reps=[1], n_train=30, n_test=20, base_seed=5,
    )
    assert len(enumerate_grid(grid)) == 12
    serial = run_sweep(grid, dataset, tmp_path / "p1", parallelism=1)
    parallel = run_sweep(grid, dataset, tmp_path / "p4", parallelism=4)
    same = [(r.mse, r.mae) for r in serial] == [(r.mse, r.mae) for r in parallel]
    victim = sorted((tmp_path / "p1" / "trials").glob("*.json"))[7]
    victim.unlink()
    resumed = run_sweep(grid, dataset, tmp_path / "p1", parallelism=1)
    reran = [r.trial_id for r in resumed if not r.cached]
    ok = same and len(reran) == 1 and [(r.mse, r.mae) for r in resumed] == [(r.mse, r.mae) for r in serial]
    criterion(9, ok, f"12 trials, parallelism 1 vs 4 identical MSE/MAE={same}; resume re-ran trials {reran}")


def test_criterion_10_real_data_pipeline():
    path = real_bike_file()
    if path is None:
        criterion(10, False, "real bike-sharing CSV not found (set VQR_BIKE_CSV or place data/SeoulBikeData.csv); "
                             "the sandbox has no route to its public hosts")
    raw = load_csv(path, TARGET)
    a, b = prepare(raw, 7), prepare(load_csv(path, TARGET), 7)
    ok = (len(raw) == 8760 and len(raw.attributes) == 13 and a.y.min() == 0.0 and a.y.max() == 1.0
          and a.X.shape == (8760, 7) and np.array_equal(a.X, b.X) and np.array_equal(a.y, b.y))
    criterion(10, ok, f"{len(raw)} rows, {len(raw.attributes)} attributes, target in "
                      f"[{a.y.min()}, {a.y.max()}], {a.X.shape[1]} components, deterministic")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
