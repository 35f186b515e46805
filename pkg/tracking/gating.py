"""
Gate threshold that widens after large frame corrections and relaxes geometrically.
"""
from __future__ import annotations

from dataclasses import dataclass

from registration.frame_alignment import CorrectionMagnitude

DEFAULT_TAU_GATE = 2.0


@dataclass(frozen=True)
class GateState:
    tau: float
    tau_base: float

    def __post_init__(self):
        if self.tau_base <= 0:
            raise ValueError('gate baseline must be positive')
        if self.tau < self.tau_base:
            raise ValueError('gate threshold cannot sit below its baseline')


@dataclass(frozen=True)
class GateAdaptation:
    alpha_t: float = 2.0
    alpha_theta: float = 10.0
    decay: float = 0.9


def initial_gate(tau_base: float = DEFAULT_TAU_GATE, scale: float = 1.0) -> GateState:
    if scale < 1.0:
        raise ValueError('initial gate scale must be at least 1')
    return GateState(tau_base * scale, tau_base)


def adapt_gate(gate: GateState, correction: CorrectionMagnitude,
               params: GateAdaptation = GateAdaptation()) -> GateState:
    """Inflate immediately on a large correction, otherwise decay toward the baseline"""
    candidate = gate.tau_base * (1.0 + params.alpha_t * correction.trans_m + params.alpha_theta * correction.rot_rad)
    relaxed = gate.tau_base + params.decay * (gate.tau - gate.tau_base)
    return GateState(max(candidate, relaxed, gate.tau_base), gate.tau_base)
