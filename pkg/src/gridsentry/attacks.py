"""False-data injection on the secondary-control channel.

Attacks corrupt the correction values (xi, zeta) a targeted generator
receives from its neighbors; they never touch local measurements or the
sender's own state.  Before the onset time every mode is the identity,
bit for bit.  After onset, with tau = t - t_a:

    Additive   xi + b,              zeta + b
    Ramp       xi + r * tau,        zeta
    SlowRamp   xi,                  zeta + r_s * tau
    Sinusoid   xi + A sin(w_a tau), zeta + A sin(w_a tau)
    Stealth    xi + f_s(tau),       zeta + alpha_s * f_s(tau)
    DoS        frozen xi,           zeta

f_s is a low-amplitude three-tone multisine, identical for every target
that shares a spec, so coordinated stealth injections stay correlated.
DoS freezes the received xi at the first read at or after onset and
replays it forever; zeta keeps flowing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import math
import numpy as np

from .errors import ConfigError

MODES = ("Normal", "Additive", "Ramp", "SlowRamp", "Sinusoid", "Stealth", "DoS")

# label_multi values, fixed for the life of the dataset format
CLASS_OF_MODE = {mode: k for k, mode in enumerate(MODES)}


@dataclass
class DosLatch:
    """Holds the replayed xi for one (scenario, target) pair."""

    frozen_xi: float = 0.0
    latched: bool = False

    def capture(self, xi: float) -> float:
        if not self.latched:
            self.frozen_xi = float(xi)
            self.latched = True
        return self.frozen_xi


@dataclass
class AttackSpec:
    """One scenario's attack description."""

    mode: str = "Normal"
    t_a: float = 0.70          # onset, s
    targets: tuple = (1,)      # 1-based generator indices
    b: float = 0.12            # additive bias, rad/s and pu
    r: float = 0.75            # ramp slope, 1/s
    r_s: float = 0.075         # slow ramp slope, 1/s
    amplitude: float = 0.12    # sinusoid amplitude
    omega_a: float = 2.0 * math.pi * 5.0  # sinusoid frequency, rad/s
    alpha_s: float = 0.5       # stealth zeta coupling
    a_stealth: float = 0.03    # stealth waveform amplitude bound
    stealth_seed: int = 7
    dos_channel: str = "xi"    # the frozen channel; only xi is defined

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown attack mode {self.mode!r}")
        if self.t_a < 0:
            raise ConfigError("onset must be >= 0")
        self.targets = tuple(int(i) for i in self.targets)
        if any(i < 1 for i in self.targets):
            raise ConfigError("targets are 1-based generator indices")
        if self.dos_channel != "xi":
            raise ConfigError("only the xi channel can be frozen")
        # the slow ramp must stay subordinate to the fast one
        if self.r_s > self.r / 10.0 + 1e-15:
            raise ConfigError(f"r_s={self.r_s} must be <= r/10={self.r / 10.0}")

    @property
    def class_index(self) -> int:
        return CLASS_OF_MODE[self.mode]

    def target_set(self) -> frozenset:
        """0-based indices, the engine's convention."""
        return frozenset(i - 1 for i in self.targets)


def _stealth_tones(spec: AttackSpec):
    """Three incommensurate (frequency, amplitude) pairs; phases are zero."""
    rng = np.random.Generator(np.random.PCG64(spec.stealth_seed))
    freqs = rng.uniform(0.8, 7.5, size=3) * 2.0 * math.pi  # rad/s
    weights = rng.uniform(0.5, 1.0, size=3)
    amps = weights * (spec.a_stealth / weights.sum())
    return freqs, amps


def stealth_waveform(tau: float, spec: AttackSpec) -> float:
    """Multisine f_s(tau); |f_s| <= a_stealth for all tau and f_s(0) = 0."""
    freqs, amps = _stealth_tones(spec)
    return float(np.sum(amps * np.sin(freqs * tau)))


def apply_attack(spec: AttackSpec, xi: float, zeta: float, t: float,
                 latch: DosLatch | None = None):
    """Transform one received (xi, zeta) pair at time t.

    Pre-onset the inputs pass through unchanged.  DoS requires a latch,
    owned by the caller, one per (scenario, target).
    """
    if spec.mode == "Normal" or t < spec.t_a:
        return xi, zeta
    tau = t - spec.t_a
    if spec.mode == "Additive":
        return xi + spec.b, zeta + spec.b
    if spec.mode == "Ramp":
        return xi + spec.r * tau, zeta
    if spec.mode == "SlowRamp":
        return xi, zeta + spec.r_s * tau
    if spec.mode == "Sinusoid":
        inj = spec.amplitude * math.sin(spec.omega_a * tau)
        return xi + inj, zeta + inj
    if spec.mode == "Stealth":
        inj = stealth_waveform(tau, spec)
        return xi + inj, zeta + spec.alpha_s * inj
    # DoS
    if latch is None:
        raise ConfigError("DoS needs a DosLatch from the caller")
    return latch.capture(xi), zeta
