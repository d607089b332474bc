"""Trials, sweeps, and result files.

A trial builds one reservoir, encodes and simulates every image of the
selected splits, trains the readout on the training features and scores it on
train/validation/test. Every random choice in a trial is derived from
``(master_seed, axis values, trial index)`` so adding sweep cells never
perturbs existing ones.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import logging
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import datasets
from .dynamics import TriggerThresholds
from .encoder import EncoderParams, encode_sequences
from .errors import ConfigError, OscresError
from .readout import PackedRows, TrainConfig, evaluate, train
from .simulator import DEFAULT_N_SNAPSHOTS, SimulationConfig, WindowedDrive, initial_state, simulate
from .topology import build_topology

log = logging.getLogger(__name__)

GRID_VALUES = tuple(round(0.1 * i, 1) for i in range(1, 10))
SIZE_VALUES = tuple(range(50, 501, 50))


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a trial needs. ``augment`` adds pixel noise to training images only.

    Subset sizes cut the shuffled splits (``None`` keeps the whole split, 0
    skips it). ``T=None`` runs one step per input frame.
    """

    n_rings: int = 100
    size_lower: int = 3
    size_upper: int = 10
    epsilon: float = 0.2
    p: float = 0.4
    k: int = 4
    input_ring_fraction: float | None = None
    n_in: int = 16
    n_ts: int = 2018
    stride: int = 1
    dt: float = 0.1
    T: float | None = None
    v_thl: float = TriggerThresholds.v_thl
    v_thh: float = TriggerThresholds.v_thh
    warmup_max_steps: int = 200
    n_snapshots: int = DEFAULT_N_SNAPSHOTS
    snapshot_stride: int | None = None
    noise_sigma: float = 0.05
    augment: bool = True
    train: TrainConfig = field(default_factory=TrainConfig)
    trials: int = 3
    master_seed: int = 0
    data_dir: str | None = None
    split_seed: int = 0
    train_subset: int | None = 5000
    validation_subset: int | None = 1000
    test_subset: int | None = 1000
    sim_batch: int = 100
    workers: int = 1

    def __post_init__(self):
        if isinstance(self.train, dict):
            object.__setattr__(self, "train", TrainConfig(**self.train))
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.n_rings < 1:
            raise ConfigError("n_rings must be >= 1")
        if self.n_snapshots < 1:
            raise ConfigError("n_snapshots must be >= 1")
        for name in ("train_subset", "validation_subset", "test_subset"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ConfigError(f"{name} must be >= 0")
        self.encoder_params()
        self.sim_config(0)
        TriggerThresholds(self.v_thl, self.v_thh)

    # --- derived component configs

    def encoder_params(self, augment: bool = False) -> EncoderParams:
        return EncoderParams(
            n_in=self.n_in, n_ts=self.n_ts, stride=self.stride,
            noise_sigma=self.noise_sigma, augment=augment and self.augment,
        )

    def sim_config(self, seed: int) -> SimulationConfig:
        base = SimulationConfig(dt=self.dt, T=self.T)
        n_steps = base.n_steps(self.n_ts)
        stride = self.snapshot_stride or max(1, n_steps // self.n_snapshots)
        return SimulationConfig(
            dt=self.dt,
            T=self.T,
            thresholds=TriggerThresholds(self.v_thl, self.v_thh),
            warmup_max_steps=self.warmup_max_steps,
            snapshot_stride=stride,
            seed=seed,
        )

    def axes(self) -> dict:
        return {"n_rings": self.n_rings, "epsilon": self.epsilon, "p": self.p}

    # --- serialization

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def config_hash(self) -> str:
        d = self.to_dict()
        for k in ("trials", "data_dir", "sim_batch", "workers"):
            d.pop(k)
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:12]


def full_scale(config: ExperimentConfig) -> ExperimentConfig:
    """Settings for the full-MNIST runs: 300 rings, all 50k/10k/10k images, 5 trials."""
    return config.replace(
        n_rings=300, train_subset=None, validation_subset=None, test_subset=None, trials=5
    )


def derive_seed(master_seed: int, axes: dict, trial_index: int, purpose: str = "") -> int:
    blob = json.dumps([int(master_seed), axes, int(trial_index), purpose], sort_keys=True)
    return int.from_bytes(hashlib.blake2b(blob.encode(), digest_size=8).digest(), "little")


@dataclass
class TrialResult:
    config_hash: str
    trial_index: int
    seed: int
    train_accuracy: float | None
    validation_accuracy: float | None
    test_accuracy: float | None
    wall_time: float
    axes: dict = field(default_factory=dict)
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


# ---------------------------------------------------------------------------
# data


@lru_cache(maxsize=4)
def _load_splits(data_dir: str | None, split_seed: int):
    train_file, test_file = datasets.load_mnist(data_dir)
    n = len(train_file)
    spec = datasets.SplitSpec(train=n - n // 6, validation=n // 6, test=len(test_file), shuffle_seed=split_seed)
    return datasets.split(train_file, test_file, spec)


def load_data(config: ExperimentConfig):
    """(train, validation, test) LabeledImageSets, cut to the configured subset sizes."""
    tr, va, te = _load_splits(config.data_dir, config.split_seed)

    def cut(s, n):
        return s if n is None else s.subset(slice(0, min(n, len(s))))

    return (
        cut(tr, config.train_subset),
        cut(va, config.validation_subset),
        cut(te, config.test_subset),
    )


# ---------------------------------------------------------------------------
# trials


def reservoir_features(topology, sim_cfg, state0, images, enc: EncoderParams, rng, batch=100) -> PackedRows:
    """Flattened snapshot features of shape (n_images, N * n_snap), bit-packed by row."""
    n = len(images)
    times = sim_cfg.snapshot_times(enc.n_ts)
    F = topology.n_neurons * times.size
    out = np.empty((n, (F + 7) // 8), dtype=np.uint8)
    for i in range(0, n, batch):
        seqs = encode_sequences(images[i : i + batch], enc, rng)
        snaps, _, _, _ = simulate(topology, WindowedDrive(seqs, enc.n_in, enc.n_ts, enc.stride), sim_cfg, state0)
        out[i : i + len(seqs)] = np.packbits(snaps.reshape(len(seqs), -1), axis=1)
    return PackedRows(out, F)


def run_trial(config: ExperimentConfig, trial_index: int, data=None) -> TrialResult:
    """Run one seeded trial end to end; failures are captured in ``error``."""
    axes = config.axes()
    seed = derive_seed(config.master_seed, axes, trial_index)
    t0 = time.perf_counter()
    # missing or corrupt data is fatal for the whole run, not a trial failure
    tr, va, te = data if data is not None else load_data(config)
    try:
        topology = build_topology(
            config.n_rings, config.epsilon, config.p, config.k, config.n_in,
            seed=derive_seed(config.master_seed, axes, trial_index, "topology"),
            size_range=(config.size_lower, config.size_upper),
            input_ring_fraction=config.input_ring_fraction,
        )
        sim_cfg = config.sim_config(derive_seed(config.master_seed, axes, trial_index, "simulation"))
        state0 = initial_state(topology, sim_cfg)
        noise_rng = np.random.default_rng(derive_seed(config.master_seed, axes, trial_index, "noise"))

        def feats(split, augment=False):
            return reservoir_features(
                topology, sim_cfg, state0, split.images, config.encoder_params(augment), noise_rng,
                config.sim_batch,
            )

        X_tr = feats(tr, augment=True)
        train_cfg = dataclasses.replace(
            config.train, seed=derive_seed(config.master_seed, axes, trial_index, "readout") % 2**32
        )
        model = train(X_tr, tr.labels, train_cfg)
        acc_tr = evaluate(model, X_tr, tr.labels)
        del X_tr
        acc_va = evaluate(model, feats(va), va.labels) if len(va) else None
        acc_te = evaluate(model, feats(te), te.labels) if len(te) else None
        return TrialResult(config.config_hash(), trial_index, seed, acc_tr, acc_va, acc_te,
                           time.perf_counter() - t0, axes)
    except OscresError as exc:
        log.error("trial %d at %s failed: %s", trial_index, axes, exc)
        return TrialResult(config.config_hash(), trial_index, seed, None, None, None,
                           time.perf_counter() - t0, axes, error=f"{type(exc).__name__}: {exc}")
    except Exception as exc:  # keep sweeps alive; the traceback goes into the report
        log.exception("trial %d at %s crashed", trial_index, axes)
        return TrialResult(config.config_hash(), trial_index, seed, None, None, None,
                           time.perf_counter() - t0, axes,
                           error=f"{type(exc).__name__}: {exc}\n{traceback.format_exc(limit=3)}")


def baseline_trial(config: ExperimentConfig, trial_index: int = 0, data=None) -> TrialResult:
    """Same readout trained directly on the 1024-sample Hilbert sequence of each image."""
    axes = {"baseline": "hilbert-linear"}
    t0 = time.perf_counter()
    tr, va, te = data if data is not None else load_data(config)
    enc = config.encoder_params()
    train_cfg = dataclasses.replace(
        config.train, seed=derive_seed(config.master_seed, axes, trial_index, "readout") % 2**32
    )
    X_tr = encode_sequences(tr.images, enc)
    model = train(X_tr, tr.labels, train_cfg)
    acc_va = evaluate(model, encode_sequences(va.images, enc), va.labels) if len(va) else None
    acc_te = evaluate(model, encode_sequences(te.images, enc), te.labels) if len(te) else None
    return TrialResult(config.config_hash(), trial_index, 0, evaluate(model, X_tr, tr.labels),
                       acc_va, acc_te, time.perf_counter() - t0, axes)


def _trial_job(args):
    config, trial_index = args
    return run_trial(config, trial_index)


def run_trials(configs_and_trials, workers: int = 1) -> list[TrialResult]:
    jobs = list(configs_and_trials)
    if workers <= 1:
        return [_trial_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_trial_job, jobs))


# ---------------------------------------------------------------------------
# sweeps


@dataclass
class SweepResult:
    axis_names: list[str]
    axis_values: list[list]
    rows: list[TrialResult]

    def ok_rows(self) -> list[TrialResult]:
        return [r for r in self.rows if r.ok]

    def failures(self) -> list[TrialResult]:
        return [r for r in self.rows if not r.ok]

    def cells(self) -> list[dict]:
        """Per-cell mean and sample std (ddof=1) of each accuracy over successful trials."""
        groups: dict[tuple, list[TrialResult]] = {}
        for r in self.rows:
            groups.setdefault(tuple(r.axes[a] for a in self.axis_names), []).append(r)
        out = []
        for key in sorted(groups):
            rows = groups[key]
            cell = dict(zip(self.axis_names, key))
            good = [r for r in rows if r.ok]
            cell["n_trials"] = len(good)
            cell["n_failed"] = len(rows) - len(good)
            for metric in ("train_accuracy", "validation_accuracy", "test_accuracy"):
                vals = [getattr(r, metric) for r in good if getattr(r, metric) is not None]
                cell[f"{metric}_mean"] = float(np.mean(vals)) if vals else None
                cell[f"{metric}_std"] = float(np.std(vals, ddof=1)) if len(vals) > 1 else None
            out.append(cell)
        return out


def grid_sweep(template: ExperimentConfig, eps_values=GRID_VALUES, p_values=GRID_VALUES,
               trials: int | None = None) -> SweepResult:
    trials = trials or template.trials
    jobs = [
        (template.replace(epsilon=e, p=p), t)
        for e in eps_values for p in p_values for t in range(trials)
    ]
    rows = run_trials(jobs, template.workers)
    return SweepResult(["epsilon", "p"], [list(eps_values), list(p_values)], rows)


def size_sweep(template: ExperimentConfig, sizes=SIZE_VALUES, trials: int | None = 10,
               epsilon: float = 0.5, p: float = 0.5) -> SweepResult:
    trials = trials or template.trials
    jobs = [
        (template.replace(n_rings=n, epsilon=epsilon, p=p), t)
        for n in sizes for t in range(trials)
    ]
    rows = run_trials(jobs, template.workers)
    return SweepResult(["n_rings"], [list(sizes)], rows)


def single_run(config: ExperimentConfig) -> SweepResult:
    jobs = [(config, t) for t in range(config.trials)]
    rows = run_trials(jobs, config.workers)
    return SweepResult(["n_rings", "epsilon", "p"], [[config.n_rings], [config.epsilon], [config.p]], rows)


# ---------------------------------------------------------------------------
# reports

CSV_FIELDS = [
    "config_hash", "trial_index", "seed", "train_accuracy", "validation_accuracy",
    "test_accuracy", "wall_time", "error",
]


def report(sweep: SweepResult, out_dir) -> dict:
    """Write ``trials.csv``, ``summary.json`` and the plot-ready ``aggregate.csv``."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OscresError(f"cannot create {out}: {exc}") from exc
    fields = sweep.axis_names + CSV_FIELDS
    with open(out / "trials.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields)
        w.writeheader()
        for r in sweep.ok_rows():
            row = {a: r.axes[a] for a in sweep.axis_names}
            row.update({k: getattr(r, k) for k in CSV_FIELDS})
            row["error"] = ""
            w.writerow(row)
    cells = sweep.cells()
    summary = {
        "axes": dict(zip(sweep.axis_names, sweep.axis_values)),
        "std_ddof": 1,
        "n_rows": len(sweep.ok_rows()),
        "cells": cells,
        "failures": [
            {**{a: r.axes.get(a) for a in sweep.axis_names}, "trial_index": r.trial_index, "error": r.error}
            for r in sweep.failures()
        ],
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=1))
    agg_fields = sweep.axis_names + ["n_trials", "test_accuracy_mean", "test_accuracy_std"]
    with open(out / "aggregate.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=agg_fields, extrasaction="ignore")
        w.writeheader()
        for c in cells:
            w.writerow(c)
    return summary


def read_trials_csv(path) -> SweepResult:
    """Rebuild a sweep from ``trials.csv`` (successful rows only)."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        axis_names = [f for f in reader.fieldnames if f not in CSV_FIELDS]
        rows = []
        for rec in reader:
            def num(key):
                v = rec[key]
                return None if v in ("", "None") else float(v)

            axes = {a: _parse_axis(rec[a]) for a in axis_names}
            rows.append(TrialResult(
                rec["config_hash"], int(rec["trial_index"]), int(rec["seed"]),
                num("train_accuracy"), num("validation_accuracy"), num("test_accuracy"),
                float(rec["wall_time"]), axes, rec["error"] or None,
            ))
    values = [sorted({r.axes[a] for r in rows}) for a in axis_names]
    return SweepResult(axis_names, values, rows)


def _parse_axis(v: str):
    try:
        f = float(v)
    except ValueError:
        return v
    return int(f) if f.is_integer() and "." not in v else f
