"""Reduced-order closed-loop simulation of the ten-inverter microgrid.

Per step of size dt the electrical side relaxes the active and reactive
power shares toward the droop-consistent equilibrium for the present
load, then re-evaluates each generator's operating frequency and voltage
(droop statics plus the secondary corrections).  Every ctrl_period the
consensus layer updates the corrections xi / zeta by one forward-Euler
step, reading neighbor values through a jittered, possibly attacked,
communication channel.

The nominal time base is dt = 2e-6 s over 1 s (500,001 samples); the
desk-scale default dt = 1e-4 s keeps the same control period and attack
behavior at 1/50 of the cost.
"""

from __future__ import annotations

import math
import time as _time
from dataclasses import dataclass

import numpy as np

from .attacks import AttackSpec, DosLatch, apply_attack
from .errors import ConfigError, SimulationDiverged
from .params import DGState, DroopParams, SecondaryGains, SimConfig
from .tables import SCHEMA, SampleTable

TWO_PI = 2.0 * math.pi
V_FLOOR = 1e-6  # pu, divide-by-zero guard in the current calculation


def droop_eval(p, q, droop: DroopParams, omega_star: float, v_star: float):
    """Static droop characteristics: outputs before any correction."""
    omega = omega_star - droop.m * (np.asarray(p, dtype=np.float64) - droop.p_star)
    v = v_star - droop.n * (np.asarray(q, dtype=np.float64) - droop.q_star)
    return omega, v


def equilibrium_shares(offsets, slopes, setpoints, ref: float, load: float):
    """Power split where all corrected characteristics meet one operating point.

    Returns (shares, common).  shares always sums to the load exactly by
    construction, which is the surrogate's power-balance guarantee.
    """
    slopes = np.asarray(slopes, dtype=np.float64)
    if (slopes <= 0).any():
        raise ConfigError("power sharing undefined with a non-positive droop slope")
    inv = 1.0 / slopes
    lifted = (ref + np.asarray(offsets, dtype=np.float64)) * inv
    common = (lifted.sum() + np.sum(setpoints) - load) / inv.sum()
    shares = np.asarray(setpoints, dtype=np.float64) + (ref + offsets - common) * inv
    return shares, common


def secondary_step(xi, zeta, omega, v, graph, gains: SecondaryGains,
                   omega_star: float, v_star: float, h: float,
                   received_xi=None, received_zeta=None):
    """One forward-Euler update of the correction states.

    received_xi / received_zeta are (n, n) matrices whose [i, j] entry is
    neighbor j's value as seen by i, already delayed or corrupted by the
    caller.  They default to the senders' current values.
    """
    w = graph.weights
    xi = np.asarray(xi, dtype=np.float64)
    zeta = np.asarray(zeta, dtype=np.float64)
    if received_xi is None:
        received_xi = np.broadcast_to(xi, w.shape)
    if received_zeta is None:
        received_zeta = np.broadcast_to(zeta, w.shape)
    deg = w.sum(axis=1)
    cons_xi = deg * xi - (w * received_xi).sum(axis=1)
    cons_zeta = deg * zeta - (w * received_zeta).sum(axis=1)
    new_xi = xi + h * (-gains.k_p * (np.asarray(omega) - omega_star) - gains.c_f * cons_xi)
    new_zeta = zeta + h * (-gains.k_q * (np.asarray(v) - v_star) - gains.c_v * cons_zeta)
    return new_xi, new_zeta


def quantize(x, step: float):
    """Round-half-even quantization; step 0 disables."""
    if step <= 0:
        return x
    return np.round(np.asarray(x) / step) * step


@dataclass
class SimResult:
    table: SampleTable            # labeled measurement rows
    finals: list                  # DGState at t_end
    elapsed: float                # wall seconds spent in the dynamics+measure path
    times: np.ndarray = None      # the following are kept on request only
    omega: np.ndarray = None      # (n, 10) operating frequency, rad/s
    v: np.ndarray = None          # (n, 10) operating voltage, pu
    p: np.ndarray = None
    q: np.ndarray = None
    xi: np.ndarray = None
    zeta: np.ndarray = None


def _measurement_matrix(times, p, q, omega, v, cfg: SimConfig, phases):
    """Vectorized sensor model over a whole trajectory."""
    noise = cfg.noise
    n = times.shape[0]
    groups = cfg.plant.bus_groups
    phase_v, phase_i = phases
    carrier = TWO_PI * noise.f_sw * times[:, None]  # (n, 1)

    v_bus = np.stack([v[:, list(g)].mean(axis=1) for g in groups], axis=1)
    v_meas = v_bus + noise.ripple_amp_v * np.sin(carrier + phase_v[None, :])
    v_meas = quantize(v_meas, noise.quant_step_v)

    p_bus = np.stack([p[:, list(g)].sum(axis=1) for g in groups], axis=1)
    q_bus = np.stack([q[:, list(g)].sum(axis=1) for g in groups], axis=1)
    s_bus = np.sqrt(p_bus ** 2 + q_bus ** 2)
    i_bus = s_bus / np.maximum(v_bus, V_FLOOR)
    i_meas = i_bus * (1.0 + noise.ripple_amp_i * np.sin(carrier + phase_i[None, :]))

    p_meas = quantize(p, noise.quant_step_p)
    q_meas = quantize(q, noise.quant_step_p)
    f_meas = quantize(omega / TWO_PI, noise.quant_step_f)

    data = np.empty((n, len(SCHEMA)), dtype=np.float64)
    data[:, 0] = times
    data[:, 1:4] = v_meas
    data[:, 4:7] = i_meas
    block = np.empty((n, 30), dtype=np.float64)
    block[:, 0::3] = p_meas
    block[:, 1::3] = q_meas
    block[:, 2::3] = f_meas
    data[:, 7:37] = block
    data[:, 37:39] = 0.0  # labels are attached by the dataset pipeline
    return data


def measure(p, q, omega, v, cfg: SimConfig, t: float, phases=None) -> np.ndarray:
    """Sensor row for a single instant; mainly a test surface."""
    if phases is None:
        phases = _noise_phases(cfg)
    row = _measurement_matrix(np.array([float(t)]), np.atleast_2d(p), np.atleast_2d(q),
                              np.atleast_2d(omega), np.atleast_2d(v), cfg, phases)
    return row[0]


def _noise_phases(cfg: SimConfig):
    """Per-bus ripple phases, fixed per scenario by the noise seed."""
    root = np.random.SeedSequence(cfg.noise.seed)
    phase_child, _ = root.spawn(2)
    rng = np.random.Generator(np.random.PCG64(phase_child))
    ph = rng.uniform(0.0, TWO_PI, size=(2, len(cfg.plant.bus_groups)))
    return ph[0], ph[1]


def _jitter_rng(cfg: SimConfig):
    root = np.random.SeedSequence(cfg.noise.seed)
    _, jitter_child = root.spawn(2)
    return np.random.Generator(np.random.PCG64(jitter_child))


def simulate(cfg: SimConfig, attack: AttackSpec, keep_states: bool = False) -> SimResult:
    """Run one scenario and return its labeled sample table plus end state."""
    from .pipeline import label_scenario  # local import keeps the layering one-way

    t0 = _time.perf_counter()
    n = cfg.n_samples
    stride = cfg.ctrl_stride
    n_dg = cfg.droop.m.shape[0]
    droop, gains, plant, noise = cfg.droop, cfg.gains, cfg.plant, cfg.noise

    targets = attack.target_set()
    if targets and max(targets) >= n_dg:
        raise ConfigError(f"attack target beyond generator count {n_dg}")

    edges = cfg.graph.edges()
    recv_e = np.array([e[0] for e in edges], dtype=np.intp)
    send_e = np.array([e[1] for e in edges], dtype=np.intp)
    w_e = np.array([e[2] for e in edges])
    attacked_edges = [k for k in range(len(edges)) if edges[k][0] in targets]
    latches = {i: DosLatch() for i in targets}

    jit = _jitter_rng(cfg)
    phases = _noise_phases(cfg)

    times = np.arange(n, dtype=np.float64) * cfg.dt
    p, _ = equilibrium_shares(np.zeros(n_dg), droop.m, droop.p_star,
                              cfg.omega_star, plant.p_load(0.0))
    q, _ = equilibrium_shares(np.zeros(n_dg), droop.n, droop.q_star,
                              cfg.v_star, plant.q_load(0.0))
    xi = np.zeros(n_dg)
    zeta = np.zeros(n_dg)
    omega, v = droop_eval(p, q, droop, cfg.omega_star, cfg.v_star)
    omega = omega + xi
    v = v + zeta

    n_ctrl = (n - 1) // stride
    hist_xi = np.empty((n_ctrl + 1, n_dg))
    hist_zeta = np.empty((n_ctrl + 1, n_dg))
    hist_xi[0] = xi
    hist_zeta[0] = zeta

    traj_p = np.empty((n, n_dg))
    traj_q = np.empty((n, n_dg))
    traj_omega = np.empty((n, n_dg))
    traj_v = np.empty((n, n_dg))
    traj_xi = np.empty((n, n_dg)) if keep_states else None
    traj_zeta = np.empty((n, n_dg)) if keep_states else None

    r_p = cfg.dt / plant.tau_p
    r_q = cfg.dt / plant.tau_q
    deg = cfg.graph.weights.sum(axis=1)
    k_ctrl = 0

    for i in range(n):
        t = times[i]
        if i > 0 and i % stride == 0:
            k_ctrl += 1
            # neighbor reads arrive 1 + U{0..jitter_max} control periods late
            delays = 1 + jit.integers(0, noise.jitter_max + 1, size=len(edges))
            src_idx = np.maximum(k_ctrl - delays, 0)
            rx_xi = hist_xi[src_idx, send_e]
            rx_zeta = hist_zeta[src_idx, send_e]
            if attack.mode != "Normal":
                for e in attacked_edges:
                    rx_xi[e], rx_zeta[e] = apply_attack(
                        attack, rx_xi[e], rx_zeta[e], t, latches[edges[e][0]])
            cons_xi = deg * xi - np.bincount(recv_e, weights=w_e * rx_xi,
                                             minlength=n_dg)
            cons_zeta = deg * zeta - np.bincount(recv_e, weights=w_e * rx_zeta,
                                                 minlength=n_dg)
            xi = xi + cfg.ctrl_period * (-gains.k_p * (omega - cfg.omega_star)
                                         - gains.c_f * cons_xi)
            zeta = zeta + cfg.ctrl_period * (-gains.k_q * (v - cfg.v_star)
                                             - gains.c_v * cons_zeta)
            hist_xi[k_ctrl] = xi
            hist_zeta[k_ctrl] = zeta
            if not (np.isfinite(xi).all() and np.isfinite(zeta).all()):
                raise SimulationDiverged(t, "secondary corrections")
        if i > 0:
            p_ss, _ = equilibrium_shares(xi, droop.m, droop.p_star,
                                         cfg.omega_star, plant.p_load(t))
            q_ss, _ = equilibrium_shares(zeta, droop.n, droop.q_star,
                                         cfg.v_star, plant.q_load(t))
            p = p + r_p * (p_ss - p)
            q = q + r_q * (q_ss - q)
            omega, v = droop_eval(p, q, droop, cfg.omega_star, cfg.v_star)
            omega = omega + xi
            v = v + zeta
        traj_p[i] = p
        traj_q[i] = q
        traj_omega[i] = omega
        traj_v[i] = v
        if keep_states:
            traj_xi[i] = xi
            traj_zeta[i] = zeta

    if not (np.isfinite(p).all() and np.isfinite(q).all()):
        raise SimulationDiverged(times[-1], "power states")

    data = _measurement_matrix(times, traj_p, traj_q, traj_omega, traj_v, cfg, phases)
    table = label_scenario(SampleTable(SCHEMA, data), attack)

    finals = [DGState(omega=float(omega[i]), v=float(v[i]), p=float(p[i]),
                      q=float(q[i]), xi=float(xi[i]), zeta=float(zeta[i]))
              for i in range(n_dg)]
    elapsed = _time.perf_counter() - t0
    return SimResult(table=table, finals=finals, elapsed=elapsed,
                     times=times if keep_states else None,
                     omega=traj_omega if keep_states else None,
                     v=traj_v if keep_states else None,
                     p=traj_p if keep_states else None,
                     q=traj_q if keep_states else None,
                     xi=traj_xi, zeta=traj_zeta)


def run_scenario(cfg: SimConfig, attack: AttackSpec) -> SampleTable:
    """The one-call surface: labeled measurement table for one scenario."""
    return simulate(cfg, attack).table
