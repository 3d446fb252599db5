"""Closed-form behavior of the six consensus-channel attack modes."""

import math

import numpy as np
import pytest

from gridsentry.attacks import (AttackSpec, CLASS_OF_MODE, DosLatch, MODES,
                                apply_attack, stealth_waveform)
from gridsentry.errors import ConfigError
from gridsentry.params import SimConfig
from gridsentry.simulate import run_scenario


def test_class_indices_are_stable():
    assert MODES == ("Normal", "Additive", "Ramp", "SlowRamp", "Sinusoid",
                     "Stealth", "DoS")
    assert [CLASS_OF_MODE[m] for m in MODES] == list(range(7))


def test_pre_onset_is_bitwise_identity():
    rng = np.random.Generator(np.random.PCG64(3))
    for mode in MODES[1:]:
        spec = AttackSpec(mode=mode, t_a=0.5)
        latch = DosLatch()
        for _ in range(50):
            xi, zeta = float(rng.normal()), float(rng.normal())
            t = float(rng.uniform(0.0, 0.5 - 1e-9))
            out = apply_attack(spec, xi, zeta, t, latch)
            assert out == (xi, zeta)
        assert not latch.latched


def test_additive_shifts_both_channels():
    spec = AttackSpec(mode="Additive", t_a=0.2, b=0.12)
    assert apply_attack(spec, 0.01, -0.02, 0.3) == (0.01 + 0.12, -0.02 + 0.12)


def test_ramp_grows_from_onset_on_xi_only():
    spec = AttackSpec(mode="Ramp", t_a=0.2, r=0.75)
    xi, zeta = apply_attack(spec, 0.0, 0.5, 0.3)
    assert xi == pytest.approx(0.75 * 0.1, abs=1e-15)
    assert zeta == 0.5
    # zero injection exactly at onset
    assert apply_attack(spec, 0.4, 0.5, 0.2) == (0.4, 0.5)


def test_slow_ramp_targets_zeta_only():
    spec = AttackSpec(mode="SlowRamp", t_a=0.1, r_s=0.05, r=0.75)
    xi, zeta = apply_attack(spec, 0.3, 0.0, 0.5)
    assert xi == 0.3
    assert zeta == pytest.approx(0.05 * 0.4, abs=1e-15)


def test_sinusoid_quarter_period_peaks():
    omega_a = 2.0 * math.pi * 5.0
    spec = AttackSpec(mode="Sinusoid", t_a=0.0, amplitude=0.12, omega_a=omega_a)
    tau = (math.pi / 2.0) / omega_a
    xi, zeta = apply_attack(spec, 0.0, 0.0, tau)
    assert xi == pytest.approx(0.12, abs=1e-12)
    assert zeta == pytest.approx(0.12, abs=1e-12)


def test_stealth_waveform_contract():
    spec = AttackSpec(mode="Stealth", t_a=0.0, a_stealth=0.03, stealth_seed=7)
    assert stealth_waveform(0.0, spec) == 0.0
    taus = np.linspace(0.0, 1.0, 2001)
    vals = np.array([stealth_waveform(t, spec) for t in taus])
    assert np.abs(vals).max() <= 0.03 + 1e-12
    # seeded and deterministic
    again = np.array([stealth_waveform(t, spec) for t in taus])
    assert np.array_equal(vals, again)
    other = AttackSpec(mode="Stealth", t_a=0.0, a_stealth=0.03, stealth_seed=8)
    assert not np.array_equal(
        vals, np.array([stealth_waveform(t, other) for t in taus]))


def test_stealth_couples_zeta_by_alpha():
    spec = AttackSpec(mode="Stealth", t_a=0.1, alpha_s=0.5)
    rng = np.random.Generator(np.random.PCG64(9))
    for _ in range(50):
        xi0, zeta0 = float(rng.normal()), float(rng.normal())
        t = float(rng.uniform(0.1, 1.0))
        xi, zeta = apply_attack(spec, xi0, zeta0, t)
        assert zeta - zeta0 == pytest.approx(0.5 * (xi - xi0), abs=1e-15)


def test_dos_latch_freezes_first_read():
    spec = AttackSpec(mode="DoS", t_a=0.25)
    latch = DosLatch()
    xi, zeta = apply_attack(spec, 0.0123, 0.7, 0.25, latch)
    assert (xi, zeta) == (0.0123, 0.7)
    for t, live in ((0.3, 0.5), (0.6, -0.4), (0.9, 0.0)):
        xi, zeta = apply_attack(spec, live, live, t, latch)
        assert xi == 0.0123
        assert zeta == live


def test_dos_without_latch_raises():
    spec = AttackSpec(mode="DoS", t_a=0.0)
    with pytest.raises(ConfigError):
        apply_attack(spec, 0.0, 0.0, 0.5, None)


def test_spec_validation():
    with pytest.raises(ConfigError):
        AttackSpec(mode="Replay")
    with pytest.raises(ConfigError):
        AttackSpec(mode="Additive", t_a=-0.1)
    with pytest.raises(ConfigError):
        AttackSpec(mode="Ramp", targets=(0,))
    with pytest.raises(ConfigError):
        AttackSpec(mode="SlowRamp", r=0.2, r_s=0.1)
    with pytest.raises(ConfigError):
        AttackSpec(mode="DoS", dos_channel="zeta")
    assert AttackSpec(mode="Sinusoid").target_set() == frozenset({0})


def test_scenarios_share_pre_onset_rows_bitwise():
    """The injector is a pure overlay: same config, same rows before onset."""
    cfg = SimConfig(t_end=0.4)
    base = run_scenario(cfg, AttackSpec(mode="Normal"))
    pre = base.col("time") < 0.2
    for mode in ("Additive", "Ramp", "SlowRamp", "Sinusoid", "Stealth", "DoS"):
        attacked = run_scenario(cfg, AttackSpec(mode=mode, t_a=0.2))
        feats_equal = np.array_equal(attacked.data[pre, :-2], base.data[pre, :-2])
        assert feats_equal, mode
        assert not np.array_equal(attacked.data[~pre, :-2], base.data[~pre, :-2]), mode


def test_attack_rows_labeled_from_onset():
    cfg = SimConfig(t_end=0.4)
    table = run_scenario(cfg, AttackSpec(mode="Ramp", t_a=0.2))
    y = table.col("label_multi")
    t = table.col("time")
    assert np.all(y[t < 0.2] == 0)
    assert np.all(y[t >= 0.2] == CLASS_OF_MODE["Ramp"])
    assert int(table.col("label_bin").sum()) == int((t >= 0.2).sum())
