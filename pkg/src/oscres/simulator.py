"""Discrete-time simulation of a ring-oscillator reservoir.

Order of operations per step (all neurons synchronously):

    u      = W @ y + W_in @ x_t
    v_cap' = alpha * v_cap + (1 - alpha) * u
    y'     = trigger(y, u - v_cap')

A run is initialize -> per-ring warmup -> driven loop. The batch engine keeps
B images side by side in the trailing axis of every state array; all images
of a trial share the same warmed-up starting state.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .dynamics import NeuronArrayState, StepParams, TriggerThresholds, advance
from .encoder import frame_window_index
from .errors import ConfigError, DimensionError, InputError
from .topology import ReservoirTopology

INIT_V_CAP = 0.9
DEFAULT_N_SNAPSHOTS = 64


@dataclass(frozen=True)
class SimulationConfig:
    """Simulation settings.

    ``T=None`` simulates exactly one step per input frame. ``snapshot_stride=None``
    picks ``n_steps // 64``, which yields about 64 evenly spaced snapshots.
    """

    dt: float = 0.1
    T: float | None = None
    thresholds: TriggerThresholds = field(default_factory=TriggerThresholds)
    warmup_max_steps: int = 200
    snapshot_stride: int | None = None
    seed: int = 0
    tau: float = 1.0
    keep_history: bool = False

    def __post_init__(self):
        if self.warmup_max_steps < 0:
            raise ConfigError("warmup_max_steps must be >= 0")
        if self.snapshot_stride is not None and self.snapshot_stride < 1:
            raise ConfigError("snapshot_stride must be >= 1")
        StepParams(self.dt, self.tau)

    @property
    def step_params(self) -> StepParams:
        return StepParams(self.dt, self.tau)

    def n_steps(self, n_ts: int) -> int:
        if self.T is None:
            return n_ts
        ratio = self.T / self.dt
        steps = int(round(ratio))
        if not math.isclose(ratio, steps, rel_tol=1e-9, abs_tol=1e-9):
            raise ConfigError(f"T={self.T} is not a whole number of steps of dt={self.dt}")
        if steps < n_ts:
            raise ConfigError(f"T/dt = {steps} steps is shorter than the {n_ts} input frames")
        return steps

    def stride(self, n_steps: int) -> int:
        stride = self.snapshot_stride or max(1, n_steps // DEFAULT_N_SNAPSHOTS)
        if stride > n_steps:
            raise ConfigError(f"snapshot_stride {stride} exceeds step count {n_steps}")
        return stride

    def snapshot_times(self, n_ts: int) -> np.ndarray:
        """1-based step indices after which a snapshot is recorded."""
        n = self.n_steps(n_ts)
        s = self.stride(n)
        return np.arange(s, n + 1, s)


@dataclass
class SnapshotMatrix:
    """Binary outputs ``Y`` of shape (N, n_snap) recorded after the steps in ``times``."""

    Y: np.ndarray
    times: np.ndarray

    def __post_init__(self):
        self.Y = np.asarray(self.Y, dtype=np.uint8)
        self.times = np.asarray(self.times, dtype=np.int64)
        if self.Y.ndim != 2 or self.Y.shape[1] != self.times.size:
            raise DimensionError(f"Y shape {self.Y.shape} does not match {self.times.size} times")

    @property
    def n_neurons(self) -> int:
        return self.Y.shape[0]

    @property
    def n_snap(self) -> int:
        return self.Y.shape[1]


@dataclass
class SimulationResult:
    snapshots: SnapshotMatrix
    output_history: np.ndarray | None = None
    cap_history: np.ndarray | None = None


# ---------------------------------------------------------------------------
# drive sources


class ArrayDrive:
    """Explicit frames of shape (n_ts, n_in) or (B, n_ts, n_in)."""

    def __init__(self, frames: np.ndarray):
        frames = np.asarray(frames, dtype=np.float64)
        if frames.ndim == 2:
            frames = frames[None]
        if frames.ndim != 3:
            raise DimensionError(f"frames must be 2-D or 3-D, got shape {frames.shape}")
        if not np.all(np.isfinite(frames)):
            raise InputError("drive contains non-finite values")
        self.frames = frames
        self.batch, self.n_ts, self.n_in = frames.shape

    def key(self, t: int) -> int:
        return t

    def frame(self, t: int) -> np.ndarray:
        return self.frames[:, t, :]


class WindowedDrive:
    """Frames generated on the fly from Hilbert sequences (B, L).

    Equivalent to :func:`oscres.encoder.window_embed` without materializing
    the expanded ``(B, n_ts, n_in)`` array.
    """

    def __init__(self, sequences: np.ndarray, n_in: int, n_ts: int, stride: int = 1):
        seq = np.asarray(sequences, dtype=np.float64)
        if seq.ndim == 1:
            seq = seq[None]
        if not np.all(np.isfinite(seq)):
            raise InputError("drive contains non-finite values")
        L = seq.shape[1]
        if n_in > L:
            raise DimensionError(f"window {n_in} longer than sequence {L}")
        self.seq = seq
        self.batch = seq.shape[0]
        self.n_in, self.n_ts, self.win_stride = n_in, n_ts, stride
        self.window = frame_window_index((L - n_in) // stride + 1, n_ts)

    def key(self, t: int) -> int:
        return int(self.window[t])

    def frame(self, t: int) -> np.ndarray:
        j = int(self.window[t]) * self.win_stride
        return self.seq[:, j : j + self.n_in]


# ---------------------------------------------------------------------------
# initialization and warmup


def initialize(topology: ReservoirTopology, rng) -> NeuronArrayState:
    """All capacitors at 0.9, all neurons dormant except one random neuron per ring."""
    rng = np.random.default_rng(rng)
    v = np.full(topology.n_neurons, INIT_V_CAP)
    y = np.ones(topology.n_neurons)
    for ring in topology.rings:
        y[ring.start + int(rng.integers(ring.size))] = 0.0
    return NeuronArrayState(v, y)


def intra_ring_matrix(topology: ReservoirTopology) -> sp.csr_matrix:
    """The unit-weight ring-predecessor part of ``W``."""
    W = topology.W.tocoo()
    keep = W.data == 1.0
    same_ring = topology.ring_of()[W.row] == topology.ring_of()[W.col]
    keep &= same_ring
    M = sp.csr_matrix((W.data[keep], (W.row[keep], W.col[keep])), shape=W.shape)
    M.sort_indices()
    return M


def warmup(
    state: NeuronArrayState, topology: ReservoirTopology, config: SimulationConfig, rng
) -> NeuronArrayState:
    """Evolve each ring in isolation for its own uniform duration in [0, warmup_max_steps]."""
    rng = np.random.default_rng(rng)
    durations = rng.integers(0, config.warmup_max_steps + 1, size=topology.n_rings)
    if config.warmup_max_steps == 0 or durations.max() == 0:
        return state.copy()
    per_neuron = np.repeat(durations, topology.sizes)
    M = intra_ring_matrix(topology)
    params, th = config.step_params, config.thresholds
    cur = state.copy()
    for s in range(int(durations.max())):
        active = per_neuron > s
        nxt = advance(cur, M @ cur.y_out, params, th)
        cur = NeuronArrayState(
            np.where(active, nxt.v_cap, cur.v_cap), np.where(active, nxt.y_out, cur.y_out)
        )
    return cur


def initial_state(topology: ReservoirTopology, config: SimulationConfig) -> NeuronArrayState:
    """Seeded initialize + warmup; the same ``config.seed`` always gives the same state."""
    r_init, r_warm = (np.random.default_rng(s) for s in np.random.SeedSequence(config.seed).spawn(2))
    return warmup(initialize(topology, r_init), topology, config, r_warm)


# ---------------------------------------------------------------------------
# stepping


def step(
    state: NeuronArrayState,
    topology: ReservoirTopology,
    input_frame: np.ndarray,
    params: StepParams,
    thresholds: TriggerThresholds,
) -> NeuronArrayState:
    """Advance one step. ``input_frame`` has shape (n_in,) or (n_in, B) matching the state."""
    x = np.asarray(input_frame, dtype=np.float64)
    if x.shape[0] != topology.n_in:
        raise DimensionError(f"input frame has {x.shape[0]} channels, topology expects {topology.n_in}")
    if not np.all(np.isfinite(x)):
        raise InputError("input frame contains non-finite values")
    if state.v_cap.shape[0] != topology.n_neurons:
        raise DimensionError("state size does not match topology")
    u = topology.W @ state.y_out + topology.W_in @ x
    return advance(state, u, params, thresholds)


def simulate(
    topology: ReservoirTopology,
    drive,
    config: SimulationConfig,
    state0: NeuronArrayState | None = None,
    keep_history: bool | None = None,
):
    """Batch engine.

    ``drive`` is an :class:`ArrayDrive`, a :class:`WindowedDrive`, or a frames
    array. Returns ``(snapshots, times, out_hist, cap_hist)`` where
    ``snapshots`` has shape (B, N, n_snap) as uint8 and the histories, when
    requested, have shape (n_steps + 1, N, B).
    """
    if not hasattr(drive, "frame"):
        drive = ArrayDrive(drive)
    if drive.n_in != topology.n_in:
        raise DimensionError(f"drive has {drive.n_in} channels, topology expects {topology.n_in}")
    keep = config.keep_history if keep_history is None else keep_history
    n_steps = config.n_steps(drive.n_ts)
    stride = config.stride(n_steps)
    times = np.arange(stride, n_steps + 1, stride)
    if state0 is None:
        state0 = initial_state(topology, config)
    B, N = drive.batch, topology.n_neurons
    v = np.repeat(state0.v_cap[:, None], B, axis=1)
    y = np.repeat(state0.y_out[:, None], B, axis=1)
    a = config.step_params.alpha
    thl, thh = config.thresholds.v_thl, config.thresholds.v_thh
    W, W_in = topology.W, topology.W_in

    snaps = np.empty((B, N, times.size), dtype=np.uint8)
    out_hist = cap_hist = None
    if keep:
        out_hist = np.empty((n_steps + 1, N, B), dtype=np.uint8)
        cap_hist = np.empty((n_steps + 1, N, B))
        out_hist[0], cap_hist[0] = y, v
    zero_in = np.zeros((N, B))
    last_key, u_in = None, zero_in
    leak, sig = np.empty((N, B)), np.empty((N, B))
    rise, hold = np.empty((N, B), dtype=bool), np.empty((N, B), dtype=bool)
    k = 0
    for t in range(n_steps):
        if t < drive.n_ts:
            key = drive.key(t)
            if key != last_key:
                u_in = W_in @ np.ascontiguousarray(drive.frame(t).T)
                last_key = key
        else:
            u_in = zero_in
        u = W @ y
        u += u_in
        # in place, same operation order as a * v + (1 - a) * u
        v *= a
        np.multiply(u, 1.0 - a, out=leak)
        v += leak
        np.subtract(u, v, out=sig)
        # outputs are exactly 0 or 1: set where sig >= thh, clear where sig <= thl.
        # Arithmetic on masks is much faster than masked assignment here.
        np.greater_equal(sig, thh, out=rise)
        np.greater(sig, thl, out=hold)
        np.maximum(y, rise, out=y)
        np.multiply(y, hold, out=y)
        if keep:
            out_hist[t + 1], cap_hist[t + 1] = y, v
        if (t + 1) % stride == 0:
            snaps[:, :, k] = y.T
            k += 1
    return snaps, times, out_hist, cap_hist


def run(topology: ReservoirTopology, drive, config: SimulationConfig) -> SimulationResult:
    """Simulate one input (frames of shape (n_ts, n_in)) from the seeded initial state."""
    if not hasattr(drive, "frame"):
        drive = ArrayDrive(drive)
    if drive.batch != 1:
        raise DimensionError("run() takes a single drive; use simulate() for batches")
    snaps, times, out_hist, cap_hist = simulate(topology, drive, config)
    return SimulationResult(
        SnapshotMatrix(snaps[0], times),
        None if out_hist is None else out_hist[:, :, 0],
        None if cap_hist is None else cap_hist[:, :, 0],
    )
