"""Parameter blocks for the ten-inverter microgrid model.

The plant is a reduced-order surrogate: droop statics per generator, a
first-order relaxation of the power shares toward the network-consistent
equilibrium, and a sparse-communication consensus layer that trims
frequency and voltage back to their references.  Defaults are desk-scale
engineering choices; every value is overridable through the config file.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

N_DG = 10

OMEGA_STAR = 2.0 * math.pi * 60.0  # rad/s
V_STAR = 1.0  # pu


def _as_vector(x, n, name) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 0:
        arr = np.full(n, float(arr))
    if arr.shape != (n,):
        raise ConfigError(f"{name} must be scalar or length {n}, got shape {arr.shape}")
    return arr


@dataclass
class DroopParams:
    """Static droop characteristics, one entry per generator."""

    m: np.ndarray = 1e-4       # rad/s per W
    n: np.ndarray = 1e-3       # pu per var
    p_star: np.ndarray = 5e3   # W
    q_star: np.ndarray = 1e3   # var

    def __post_init__(self):
        self.m = _as_vector(self.m, N_DG, "m")
        self.n = _as_vector(self.n, N_DG, "n")
        self.p_star = _as_vector(self.p_star, N_DG, "p_star")
        self.q_star = _as_vector(self.q_star, N_DG, "q_star")
        # zero slope is tolerated so tests can freeze a channel, negative is not
        if (self.m < 0).any() or (self.n < 0).any():
            raise ConfigError("droop slopes must be non-negative")


@dataclass
class SecondaryGains:
    """Integral and consensus gains of the restoration layer."""

    k_p: float = 12.0
    k_q: float = 12.0
    c_f: float = 10.0
    c_v: float = 10.0

    def __post_init__(self):
        for name in ("k_p", "k_q", "c_f", "c_v"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")


@dataclass
class CommGraph:
    """Symmetric weighted adjacency over the generators."""

    weights: np.ndarray = None

    def __post_init__(self):
        if self.weights is None:
            self.weights = ring_graph().weights
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.shape != (N_DG, N_DG):
            raise ConfigError(f"adjacency must be {N_DG}x{N_DG}")
        if (self.weights < 0).any():
            raise ConfigError("adjacency weights must be >= 0")
        if not np.allclose(self.weights, self.weights.T):
            raise ConfigError("adjacency must be symmetric")
        if np.diagonal(self.weights).any():
            raise ConfigError("adjacency diagonal must be zero")

    def edges(self):
        """Directed (receiver, sender, weight) triples in fixed scan order."""
        recv, send = np.nonzero(self.weights)
        return [(int(i), int(j), float(self.weights[i, j])) for i, j in zip(recv, send)]


def ring_graph(weight: float = 1.0) -> CommGraph:
    w = np.zeros((N_DG, N_DG))
    for i in range(N_DG):
        w[i, (i + 1) % N_DG] = weight
        w[i, (i - 1) % N_DG] = weight
    return CommGraph(w)


@dataclass
class LoadProfile:
    """Piecewise-constant load: value of the last breakpoint at or before t."""

    points: tuple = ((0.0, 0.0),)  # ((t, value), ...) sorted by t

    def __post_init__(self):
        pts = tuple((float(t), float(v)) for t, v in self.points)
        if not pts or pts[0][0] > 0.0:
            raise ConfigError("load profile must define a value at t=0")
        if any(b[0] <= a[0] for a, b in zip(pts, pts[1:])):
            raise ConfigError("load profile breakpoints must be strictly increasing")
        self.points = pts
        self._times = np.array([p[0] for p in pts])
        self._values = np.array([p[1] for p in pts])

    def __call__(self, t):
        idx = np.searchsorted(self._times, t, side="right") - 1
        return self._values[idx]


@dataclass
class PlantParams:
    """Relaxation constants, load profiles, and the bus grouping."""

    tau_p: float = 0.02  # s
    tau_q: float = 0.02  # s
    p_load: LoadProfile = field(
        default_factory=lambda: LoadProfile(((0.0, 60e3), (0.2, 66e3)))
    )
    q_load: LoadProfile = field(default_factory=lambda: LoadProfile(((0.0, 10.5e3),)))
    # three measurement buses over the ten generators
    bus_groups: tuple = ((0, 1, 2, 3), (4, 5, 6), (7, 8, 9))

    def __post_init__(self):
        if self.tau_p <= 0 or self.tau_q <= 0:
            raise ConfigError("relaxation time constants must be > 0")
        seen = sorted(i for g in self.bus_groups for i in g)
        if seen != list(range(N_DG)):
            raise ConfigError("bus groups must partition the generator indices")


@dataclass
class NoiseConfig:
    """Measurement imperfections: switching ripple, quantization, comm jitter."""

    ripple_amp_v: float = 0.001  # pu
    ripple_amp_i: float = 0.02   # relative
    # keep f_sw * dt away from integers: at dt = 1e-4 a 10 kHz ripple is
    # sampled stroboscopically and degenerates to a constant offset
    f_sw: float = 9973.0         # Hz
    quant_step_v: float = 0.0    # pu, 0 disables
    quant_step_p: float = 5.0    # W / var, 0 disables; the quietest Q columns only swing ~20 var
    quant_step_f: float = 1e-3   # Hz, 0 disables
    jitter_max: int = 1          # extra control periods of comm delay
    seed: int = 42

    def __post_init__(self):
        if self.jitter_max < 0:
            raise ConfigError("jitter_max must be >= 0")
        for name in ("ripple_amp_v", "ripple_amp_i", "f_sw",
                     "quant_step_v", "quant_step_p", "quant_step_f"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")


@dataclass
class SimConfig:
    """Everything run_scenario needs besides the attack description."""

    dt: float = 1e-4
    t_end: float = 1.0
    ctrl_period: float = 1e-3
    omega_star: float = OMEGA_STAR
    v_star: float = V_STAR
    droop: DroopParams = field(default_factory=DroopParams)
    gains: SecondaryGains = field(default_factory=SecondaryGains)
    graph: CommGraph = field(default_factory=ring_graph)
    plant: PlantParams = field(default_factory=PlantParams)
    noise: NoiseConfig = field(default_factory=NoiseConfig)

    def __post_init__(self):
        if self.dt <= 0 or self.t_end <= 0:
            raise ConfigError("dt and t_end must be > 0")
        if self.ctrl_period < self.dt:
            raise ConfigError("ctrl_period must be >= dt")
        stride = self.ctrl_period / self.dt
        if abs(stride - round(stride)) > 1e-9:
            raise ConfigError("ctrl_period must be an integer multiple of dt")

    @property
    def ctrl_stride(self) -> int:
        return int(round(self.ctrl_period / self.dt))

    @property
    def n_samples(self) -> int:
        return int(round(self.t_end / self.dt)) + 1


@dataclass(frozen=True)
class DGState:
    """Snapshot of one generator.

    omega and v are the operating outputs after the restoration offsets
    are applied, i.e. the values the generator actually tracks.
    """

    omega: float  # rad/s
    v: float      # pu
    p: float      # W
    q: float      # var
    xi: float     # rad/s correction
    zeta: float   # pu correction

    @property
    def f(self) -> float:
        return self.omega / (2.0 * math.pi)
