import csv
import json

import numpy as np
import pytest

from oscres import experiments
from oscres.datasets import LabeledImageSet, TEST_FILES, TRAIN_FILES, write_idx
from oscres.errors import ConfigError, DataFormatError
from oscres.experiments import (
    ExperimentConfig,
    SweepResult,
    baseline_trial,
    derive_seed,
    grid_sweep,
    read_trials_csv,
    report,
    run_trial,
    size_sweep,
)
from oscres.readout import TrainConfig


def blob_digits(n, seed):
    """Synthetic 28x28 'digits': class c lights a bar at column band c."""
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 10, n)
    imgs = rng.integers(0, 30, (n, 28, 28))
    for i, c in enumerate(labels):
        imgs[i, 4:24, 2 + 2 * c : 5 + 2 * c] = 255
    return LabeledImageSet(imgs, labels)


@pytest.fixture(scope="module")
def fake_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("mnist")
    write_idx(blob_digits(120, 0), root / TRAIN_FILES[0], root / TRAIN_FILES[1])
    write_idx(blob_digits(40, 1), root / TEST_FILES[0], root / TEST_FILES[1])
    return root


def tiny(root, **kw):
    base = dict(
        n_rings=12, n_in=16, stride=64, n_ts=32, n_snapshots=8, trials=2,
        data_dir=str(root), train_subset=None, validation_subset=None, test_subset=None,
        train=TrainConfig(epochs=5, batch_size=32, learning_rate=0.01),
    )
    base.update(kw)
    return ExperimentConfig(**base)


def test_config_json_roundtrip(tmp_path):
    cfg = ExperimentConfig(n_rings=7, train=TrainConfig(epochs=3))
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg.to_dict()))
    back = ExperimentConfig.load(path)
    assert back == cfg and back.config_hash() == cfg.config_hash()
    assert isinstance(back.train, TrainConfig)


def test_config_validation(tmp_path):
    with pytest.raises(ConfigError):
        ExperimentConfig(trials=0)
    with pytest.raises(ConfigError):
        ExperimentConfig(v_thl=0.2, v_thh=0.1)
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"n_ringz": 3})
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(ConfigError):
        ExperimentConfig.load(tmp_path / "bad.json")


def test_hash_ignores_bookkeeping_fields():
    a = ExperimentConfig()
    assert a.config_hash() == a.replace(trials=9, workers=3, data_dir="/x").config_hash()
    assert a.config_hash() != a.replace(epsilon=0.3).config_hash()


def test_seed_derivation_stable():
    axes = {"n_rings": 100, "epsilon": 0.2, "p": 0.4}
    s = derive_seed(0, axes, 1)
    assert s == derive_seed(0, dict(reversed(list(axes.items()))), 1)
    assert len({derive_seed(0, axes, t) for t in range(50)}) == 50
    assert s != derive_seed(1, axes, 1)
    assert s != derive_seed(0, {**axes, "p": 0.5}, 1)


def test_default_snapshot_stride():
    cfg = ExperimentConfig()
    times = cfg.sim_config(0).snapshot_times(cfg.n_ts)
    assert 60 <= times.size <= 70


def test_trial_deterministic_and_in_range(fake_root):
    cfg = tiny(fake_root)
    a = run_trial(cfg, 0)
    b = run_trial(cfg, 0)
    assert a.ok, a.error
    assert (a.train_accuracy, a.validation_accuracy, a.test_accuracy) == (
        b.train_accuracy, b.validation_accuracy, b.test_accuracy)
    for acc in (a.train_accuracy, a.validation_accuracy, a.test_accuracy):
        assert 0.0 <= acc <= 1.0
    assert a.axes == {"n_rings": 12, "epsilon": 0.2, "p": 0.4}


def test_missing_data_is_fatal(tmp_path):
    with pytest.raises(DataFormatError):
        run_trial(tiny(tmp_path), 0)


def test_failed_trial_recorded_not_imputed(fake_root):
    # odd k is rejected while the trial builds its topology
    cfg = tiny(fake_root)
    bad = cfg.replace(k=3)
    res = run_trial(bad, 0)
    assert not res.ok and res.test_accuracy is None
    sweep = SweepResult(["n_rings", "epsilon", "p"], [[12], [0.2], [0.4]], [res, run_trial(cfg, 1)])
    cells = sweep.cells()
    assert len(cells) == 1 and cells[0]["n_trials"] == 1 and cells[0]["n_failed"] == 1
    assert cells[0]["test_accuracy_std"] is None


def test_grid_sweep_report(fake_root, tmp_path):
    cfg = tiny(fake_root, n_rings=8)
    sweep = grid_sweep(cfg, [0.2, 0.6], [0.1, 0.9], trials=2)
    assert len(sweep.rows) == 8 and all(r.ok for r in sweep.rows)
    summary = report(sweep, tmp_path / "out")
    rows = list(csv.DictReader(open(tmp_path / "out" / "trials.csv")))
    assert len(rows) == 8
    assert {(float(r["epsilon"]), float(r["p"])) for r in rows} == {(0.2, 0.1), (0.2, 0.9), (0.6, 0.1), (0.6, 0.9)}
    assert summary["std_ddof"] == 1 and len(summary["cells"]) == 4
    for c in summary["cells"]:
        accs = [r.test_accuracy for r in sweep.rows if (r.axes["epsilon"], r.axes["p"]) == (c["epsilon"], c["p"])]
        assert c["test_accuracy_mean"] == pytest.approx(np.mean(accs))
        assert c["test_accuracy_std"] == pytest.approx(np.std(accs, ddof=1))
    agg = list(csv.DictReader(open(tmp_path / "out" / "aggregate.csv")))
    assert len(agg) == 4 and set(agg[0]) == {"epsilon", "p", "n_trials", "test_accuracy_mean", "test_accuracy_std"}
    back = read_trials_csv(tmp_path / "out" / "trials.csv")
    assert back.cells() == sweep.cells()


def test_sweep_cells_independent_of_grid(fake_root):
    cfg = tiny(fake_root, n_rings=8)
    small = grid_sweep(cfg, [0.6], [0.9], trials=1)
    big = grid_sweep(cfg, [0.2, 0.6], [0.9], trials=1)
    match = [r for r in big.rows if r.axes["epsilon"] == 0.6]
    assert match[0].test_accuracy == small.rows[0].test_accuracy
    assert match[0].seed == small.rows[0].seed


def test_size_sweep_axes(fake_root):
    sweep = size_sweep(tiny(fake_root), sizes=[5, 9], trials=2)
    assert sweep.axis_names == ["n_rings"]
    assert sorted({r.axes["n_rings"] for r in sweep.rows}) == [5, 9]
    assert all(r.axes["epsilon"] == 0.5 and r.axes["p"] == 0.5 for r in sweep.rows)


def test_baseline_learns_bars(fake_root):
    res = baseline_trial(tiny(fake_root, train=TrainConfig(epochs=30, batch_size=16, learning_rate=0.01)))
    assert res.test_accuracy > 0.8


def test_full_scale_settings():
    cfg = experiments.full_scale(ExperimentConfig())
    assert cfg.n_rings == 300 and cfg.train_subset is None and cfg.trials == 5
