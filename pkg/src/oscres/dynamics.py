"""Per-neuron update rules for binary-output differentiating neurons.

Each neuron is an RC stage: the capacitor voltage relaxes toward the drive,
and the output is a Schmitt trigger applied to ``drive - v_cap``, the
time-derivative of the capacitor voltage scaled by tau. Output 0 means the
neuron is firing, 1 means dormant.

All array functions accept either a vector of length N or an ``(N, B)`` array
holding a batch of B independent networks in its trailing axis.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError


@dataclass(frozen=True)
class TriggerThresholds:
    """Lower and upper switching thresholds of the Schmitt trigger.

    The defaults sit below zero so that the resting signal (0) lies above
    ``v_thh``. That makes dormant the stable state and lets a fired neuron
    recover on its own, which is what keeps a pulse circulating in a ring.
    """

    v_thl: float = -0.3
    v_thh: float = -0.1

    def __post_init__(self):
        if not (math.isfinite(self.v_thl) and math.isfinite(self.v_thh)):
            raise ConfigError("trigger thresholds must be finite")
        if not self.v_thl < self.v_thh:
            raise ConfigError(f"need v_thl < v_thh, got {self.v_thl} >= {self.v_thh}")


@dataclass(frozen=True)
class StepParams:
    """Time-step length and the derived relaxation factor ``alpha = exp(-dt/tau)``."""

    dt: float = 0.1
    tau: float = 1.0

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ConfigError(f"dt must be positive and finite, got {self.dt}")
        if not self.tau > 0:
            raise ConfigError(f"tau must be positive, got {self.tau}")

    @property
    def alpha(self) -> float:
        return math.exp(-self.dt / self.tau)


@dataclass
class NeuronArrayState:
    """Capacitor voltages and binary outputs (0 firing, 1 dormant)."""

    v_cap: np.ndarray
    y_out: np.ndarray

    def __post_init__(self):
        self.v_cap = np.asarray(self.v_cap, dtype=np.float64)
        self.y_out = np.asarray(self.y_out, dtype=np.float64)
        if self.v_cap.shape != self.y_out.shape:
            raise DimensionError(
                f"v_cap shape {self.v_cap.shape} != y_out shape {self.y_out.shape}"
            )

    @property
    def n_neurons(self) -> int:
        return self.v_cap.shape[0]

    def copy(self) -> "NeuronArrayState":
        return NeuronArrayState(self.v_cap.copy(), self.y_out.copy())


def schmitt_trigger(prev_out: int, signal: float, th: TriggerThresholds) -> int:
    """Scalar trigger: 0 at or below ``v_thl``, 1 at or above ``v_thh``, else hold."""
    if signal <= th.v_thl:
        return 0
    if signal >= th.v_thh:
        return 1
    return prev_out


def trigger(prev_out: np.ndarray, signal: np.ndarray, th: TriggerThresholds) -> np.ndarray:
    """Elementwise :func:`schmitt_trigger` over arrays."""
    out = np.where(signal >= th.v_thh, 1.0, prev_out)
    return np.where(signal <= th.v_thl, 0.0, out)


def update_capacitors(v_cap: np.ndarray, drive: np.ndarray, params: StepParams) -> np.ndarray:
    """One exact-exponential step of ``tau dv/dt = u - v`` with u held over the step."""
    if v_cap.shape != drive.shape:
        raise DimensionError(f"drive shape {drive.shape} != v_cap shape {v_cap.shape}")
    a = params.alpha
    return a * v_cap + (1.0 - a) * drive


def update_outputs(
    y_out: np.ndarray, drive: np.ndarray, new_v_cap: np.ndarray, th: TriggerThresholds
) -> np.ndarray:
    # signal uses the post-update capacitor voltage
    if not (y_out.shape == drive.shape == new_v_cap.shape):
        raise DimensionError(
            f"shape mismatch: y_out {y_out.shape}, drive {drive.shape}, v_cap {new_v_cap.shape}"
        )
    return trigger(y_out, drive - new_v_cap, th)


def advance(
    state: NeuronArrayState, drive: np.ndarray, params: StepParams, th: TriggerThresholds
) -> NeuronArrayState:
    """Apply the capacitor update then the output update for a given drive."""
    v_new = update_capacitors(state.v_cap, drive, params)
    y_new = update_outputs(state.y_out, drive, v_new, th)
    return NeuronArrayState(v_new, y_new)
