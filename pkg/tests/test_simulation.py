"""Droop statics, consensus updates, the surrogate plant, and the sensor model."""

import math

import numpy as np
import pytest

from gridsentry.attacks import AttackSpec
from gridsentry.errors import ConfigError, SimulationDiverged
from gridsentry.params import (CommGraph, DroopParams, LoadProfile, NoiseConfig,
                               PlantParams, SecondaryGains, SimConfig, ring_graph,
                               N_DG, OMEGA_STAR, V_STAR)
from gridsentry.simulate import (droop_eval, equilibrium_shares, measure,
                                 quantize, run_scenario, secondary_step,
                                 simulate, _noise_phases)

TWO_PI = 2.0 * math.pi


def quiet_noise(**kw):
    base = dict(ripple_amp_v=0.0, ripple_amp_i=0.0, quant_step_v=0.0,
                quant_step_p=0.0, quant_step_f=0.0, jitter_max=0)
    base.update(kw)
    return NoiseConfig(**base)


# ---------------------------------------------------------------- statics

def test_droop_eval_hand_values():
    d = DroopParams()
    omega, v = droop_eval(np.full(N_DG, 5500.0), np.full(N_DG, 1100.0),
                          d, OMEGA_STAR, V_STAR)
    # 2*pi*60 - 1e-4 * 500 and 1 - 1e-3 * 100
    assert np.allclose(omega, 376.94111843077515, atol=1e-10)
    assert np.allclose(v, 0.9, atol=1e-12)


def test_droop_eval_at_setpoint_is_nominal():
    d = DroopParams()
    omega, v = droop_eval(d.p_star, d.q_star, d, OMEGA_STAR, V_STAR)
    assert np.allclose(omega, OMEGA_STAR, atol=0)
    assert np.allclose(v, V_STAR, atol=0)


def test_equilibrium_equal_split():
    shares, common = equilibrium_shares(
        np.zeros(2), np.full(2, 1e-4), np.zeros(2), 0.0, 1000.0)
    assert np.allclose(shares, 500.0, atol=1e-9)
    assert common == pytest.approx(-0.05, abs=1e-12)


def test_equilibrium_inverse_slope_weighting():
    shares, _ = equilibrium_shares(
        np.zeros(2), np.array([1e-4, 2e-4]), np.zeros(2), 0.0, 1000.0)
    assert np.allclose(shares, [2000.0 / 3.0, 1000.0 / 3.0], atol=1e-9)


def test_equilibrium_sum_matches_load_exactly():
    rng = np.random.Generator(np.random.PCG64(5))
    for _ in range(200):
        n = int(rng.integers(2, 11))
        offsets = rng.normal(scale=0.1, size=n)
        slopes = rng.uniform(5e-5, 5e-4, size=n)
        setpoints = rng.uniform(0, 8e3, size=n)
        load = float(rng.uniform(1e3, 9e4))
        shares, _ = equilibrium_shares(offsets, slopes, setpoints, OMEGA_STAR, load)
        assert abs(shares.sum() - load) <= 1e-9 * max(1.0, abs(load))


def test_equilibrium_rejects_zero_slope():
    with pytest.raises(ConfigError):
        equilibrium_shares(np.zeros(2), np.array([1e-4, 0.0]), np.zeros(2), 0.0, 1.0)


# ---------------------------------------------------------------- secondary layer

def test_secondary_isolated_node_integrates_frequency_error():
    graph = CommGraph(np.zeros((N_DG, N_DG)))
    xi = np.zeros(N_DG)
    zeta = np.zeros(N_DG)
    omega = np.full(N_DG, OMEGA_STAR)
    omega[0] += 1e-3
    v = np.full(N_DG, V_STAR)
    new_xi, new_zeta = secondary_step(xi, zeta, omega, v, graph,
                                      SecondaryGains(), OMEGA_STAR, V_STAR, 1e-3)
    assert new_xi[0] == pytest.approx(-12.0 * 1e-3 * 1e-3, abs=1e-13)
    assert np.all(new_xi[1:] == 0.0)
    assert np.all(new_zeta == 0.0)


def test_secondary_two_node_consensus_is_symmetric():
    w = np.zeros((N_DG, N_DG))
    w[0, 1] = w[1, 0] = 1.0
    xi = np.zeros(N_DG)
    xi[0], xi[1] = 0.8, -0.8
    omega = np.full(N_DG, OMEGA_STAR)
    v = np.full(N_DG, V_STAR)
    new_xi, _ = secondary_step(xi, np.zeros(N_DG), omega, v, CommGraph(w),
                               SecondaryGains(), OMEGA_STAR, V_STAR, 1e-3)
    # c_f * (0.8 - (-0.8)) * h = 0.016 off each end, sum conserved
    assert new_xi[0] == pytest.approx(0.784, abs=1e-12)
    assert new_xi[1] == pytest.approx(-0.784, abs=1e-12)
    assert new_xi[0] + new_xi[1] == 0.0


def test_quantize_rounds_to_grid():
    assert quantize(59.9996, 1e-3) == pytest.approx(60.0, abs=1e-12)
    assert quantize(59.9994, 1e-3) == pytest.approx(59.999, abs=1e-12)
    x = np.array([1.234, 5.678])
    assert quantize(x, 0.0) is x


# ---------------------------------------------------------------- parameter guards

def test_parameter_validation_errors():
    with pytest.raises(ConfigError):
        DroopParams(m=-1e-4)
    with pytest.raises(ConfigError):
        DroopParams(m=np.ones(3))
    with pytest.raises(ConfigError):
        SecondaryGains(k_p=-1.0)
    with pytest.raises(ConfigError):
        CommGraph(np.ones((3, 3)))
    asym = np.zeros((N_DG, N_DG))
    asym[0, 1] = 1.0
    with pytest.raises(ConfigError):
        CommGraph(asym)
    with pytest.raises(ConfigError):
        LoadProfile(((0.5, 1.0),))
    with pytest.raises(ConfigError):
        LoadProfile(((0.0, 1.0), (0.0, 2.0)))
    with pytest.raises(ConfigError):
        PlantParams(tau_p=0.0)
    with pytest.raises(ConfigError):
        PlantParams(bus_groups=((0, 1), (2, 3), (4, 5)))
    with pytest.raises(ConfigError):
        SimConfig(dt=1e-4, ctrl_period=2.5e-4)
    with pytest.raises(ConfigError):
        NoiseConfig(jitter_max=-1)


def test_load_profile_step_lookup():
    prof = LoadProfile(((0.0, 60e3), (0.2, 66e3)))
    assert prof(0.0) == 60e3
    assert prof(0.19999) == 60e3
    assert prof(0.2) == 66e3
    assert prof(1.0) == 66e3


# ---------------------------------------------------------------- measurement

def test_measure_ripple_phase_at_integer_cycle():
    cfg = SimConfig(noise=quiet_noise(ripple_amp_v=0.01, f_sw=10e3))
    p = np.full(N_DG, 5e3)
    q = np.full(N_DG, 1e3)
    omega = np.full(N_DG, OMEGA_STAR)
    v = np.full(N_DG, 1.0)
    phases = _noise_phases(cfg)
    row = measure(p, q, omega, v, cfg, t=1.0, phases=phases)
    # f_sw * t is an integer number of cycles, so only the phase remains
    expected = 1.0 + 0.01 * np.sin(phases[0])
    assert np.allclose(row[1:4], expected, atol=1e-6)


def test_measure_current_is_apparent_power_over_voltage():
    cfg = SimConfig(noise=quiet_noise())
    p = np.full(N_DG, 3e3)
    q = np.full(N_DG, 4e3)
    omega = np.full(N_DG, OMEGA_STAR)
    v = np.full(N_DG, 1.0)
    row = measure(p, q, omega, v, cfg, t=0.0)
    groups = cfg.plant.bus_groups
    for k, g in enumerate(groups):
        s = math.hypot(3e3 * len(g), 4e3 * len(g))
        assert row[4 + k] == pytest.approx(s / 1.0, rel=1e-12)


# ---------------------------------------------------------------- full runs

def test_stationary_at_exact_equilibrium():
    plant = PlantParams(p_load=LoadProfile(((0.0, 50e3),)),
                        q_load=LoadProfile(((0.0, 10e3),)))
    cfg = SimConfig(t_end=0.05, plant=plant, noise=quiet_noise())
    table = run_scenario(cfg, AttackSpec(mode="Normal"))
    for i in range(1, N_DG + 1):
        assert np.allclose(table.col(f"f_DG{i}"), 60.0, atol=1e-9)
        assert np.allclose(table.col(f"P_DG{i}"), 5e3, atol=1e-6)
    for b in ("V1", "V2", "V3"):
        assert np.allclose(table.col(b), 1.0, atol=1e-9)


def test_normal_run_restores_frequency_and_voltage():
    cfg = SimConfig()
    res = simulate(cfg, AttackSpec(mode="Normal"), keep_states=True)
    late = res.times > 0.5
    f = res.omega / TWO_PI
    assert np.abs(f[late] - 60.0).max() < 1e-3
    assert np.abs(res.v[late] - 1.0).max() < 1e-3


def test_normal_run_reaches_consensus():
    res = simulate(SimConfig(), AttackSpec(mode="Normal"), keep_states=True)
    spread = res.xi[-1].max() - res.xi[-1].min()
    assert spread < 1e-4


def test_power_balance_at_end():
    res = simulate(SimConfig(), AttackSpec(mode="Normal"), keep_states=True)
    load = SimConfig().plant.p_load(1.0)
    assert res.p[-1].sum() == pytest.approx(load, rel=1e-9)


def test_row_count_arithmetic():
    assert SimConfig().n_samples == 10001
    cfg = SimConfig(t_end=0.5)
    assert len(run_scenario(cfg, AttackSpec(mode="Normal"))) == 5001


def test_same_config_is_bitwise_deterministic():
    cfg = SimConfig(t_end=0.3)
    spec = AttackSpec(mode="Sinusoid", t_a=0.1)
    a = run_scenario(cfg, spec)
    b = run_scenario(cfg, spec)
    assert np.array_equal(a.data, b.data)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_unstable_gains_raise():
    cfg = SimConfig(t_end=0.2, gains=SecondaryGains(k_p=1e8))
    with pytest.raises(SimulationDiverged):
        run_scenario(cfg, AttackSpec(mode="Normal"))


def test_attack_target_beyond_generators_raises():
    with pytest.raises(ConfigError):
        run_scenario(SimConfig(t_end=0.1),
                     AttackSpec(mode="Additive", t_a=0.05, targets=(11,)))


def test_ring_graph_shape():
    g = ring_graph(0.5)
    assert g.weights.sum() == pytest.approx(2 * N_DG * 0.5)
    assert len(g.edges()) == 2 * N_DG
