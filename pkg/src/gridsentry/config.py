"""One INI file drives the whole pipeline.

Every tunable lives in a section below; anything omitted falls back to
the defaults in DEFAULT_CONFIG, and unknown sections or keys are errors
so typos never pass silently.  Command-line flags may override a few of
these (output dir, seed); the config file remains the artifact that
reproduces an experiment end to end.
"""

from __future__ import annotations

import configparser
import dataclasses
import math

from .attacks import CLASS_OF_MODE, MODES, AttackSpec
from .distill import KDConfig
from .errors import ConfigError
from .gbdt import GbdtParams
from .params import (CommGraph, DroopParams, LoadProfile, NoiseConfig,
                     PlantParams, SecondaryGains, SimConfig, ring_graph)
from .pipeline import SplitSpec

DEFAULT_CONFIG = """\
# gridsentry pipeline configuration
# every key shown here is optional; these are the defaults

[paths]
workdir = runs

[sim]
dt = 1e-4              # plant step, s
t_end = 1.0            # s
ctrl_period = 1e-3     # secondary-control update interval, s
f_nominal = 60.0       # Hz
v_nominal = 1.0        # pu

[droop]
# scalar broadcasts to all ten generators; or give ten comma-separated values
m = 1e-4               # rad/s per W
n = 1e-3               # pu per var
p_star = 5000          # W
q_star = 1000          # var

[secondary]
k_p = 12.0
k_q = 12.0
c_f = 10.0
c_v = 10.0

[graph]
ring_weight = 1.0      # adjacency weight of the ten-node ring

[plant]
tau_p = 0.02           # s
tau_q = 0.02           # s
p_load = 0:60000, 0.2:66000    # t:value breakpoints, W
q_load = 0:10500               # var
bus_groups = 1-4; 5-7; 8-10    # generator spans per measured bus

[noise]
ripple_amp_v = 0.001
ripple_amp_i = 0.02
f_sw = 9973            # Hz; off the sampling comb so ripple stays visible
quant_step_v = 0       # pu, 0 disables
quant_step_p = 5.0     # W and var
quant_step_f = 1e-3    # Hz
jitter_max = 1         # extra control periods of comm delay
seed = 42              # base seed; each scenario offsets it by its class

[attacks]
targets = 1            # 1-based generator indices, e.g. 1 or 1,3 or 1-3
onset = 0.70           # s, all modes except DoS
dos_onset = 0.25       # s, mid-transient so the freeze actually bites
bias = 0.12
ramp_slope = 0.75
slow_slope = 0.075
amplitude = 0.12
f_a = 5.0              # sinusoid frequency, Hz
alpha_s = 0.5
a_stealth = 0.03
stealth_seed = 7

[dataset]
normal_keep_fraction = 0.12
onset_guard = 0.005    # s, normal rows this close to an onset always kept
downsample_seed = 101
split_seed = 202
train_ratio = 0.70
val_ratio = 0.15
test_ratio = 0.15
to_float32 = false     # optional footprint reductions, both off by default
rescale = 1.0          # divisor applied to the wide-range P/Q/I columns

[train.binary]
num_iterations = 200
learning_rate = 0.05
num_leaves = 63
max_bins = 255
min_samples_leaf = 20
lambda_l2 = 1.0
feature_fraction = 0.9
bagging_fraction = 0.8
bagging_freq = 5
early_stopping_rounds = 20
seed = 303

[train.multiclass]
num_iterations = 200
learning_rate = 0.05
num_leaves = 63
max_bins = 255
min_samples_leaf = 20
lambda_l2 = 1.0
feature_fraction = 0.9
bagging_fraction = 0.8
bagging_freq = 5
early_stopping_rounds = 20
seed = 304

[train.student]
num_iterations = 50
learning_rate = 0.10
num_leaves = 15
max_bins = 255
min_samples_leaf = 20
lambda_l2 = 1.0
feature_fraction = 0.8
bagging_fraction = 0.8
bagging_freq = 1
early_stopping_rounds = 0
seed = 305

[distill]
alpha = 0.05           # hard labels stay a tiebreaker, not the signal
beta = 0.95
temperature = 1.0
cache = true           # cache teacher logits under <workdir>/cache

[bench]
batch_rows = 1000
repetitions = 12
warmup = 2
demo_rows = 10
demo_seed = 404
trajectory_rows = 400
"""


@dataclasses.dataclass
class AttackMenu:
    targets: tuple = (1,)
    onset: float = 0.70
    dos_onset: float = 0.25
    bias: float = 0.12
    ramp_slope: float = 0.75
    slow_slope: float = 0.075
    amplitude: float = 0.12
    f_a: float = 5.0
    alpha_s: float = 0.5
    a_stealth: float = 0.03
    stealth_seed: int = 7


@dataclasses.dataclass
class DatasetConfig:
    normal_keep_fraction: float = 0.12
    onset_guard: float = 0.005
    downsample_seed: int = 101
    split: SplitSpec = dataclasses.field(default_factory=SplitSpec)
    to_float32: bool = False
    rescale: float = 1.0


@dataclasses.dataclass
class BenchConfig:
    batch_rows: int = 1000
    repetitions: int = 12
    warmup: int = 2
    demo_rows: int = 10
    demo_seed: int = 404
    trajectory_rows: int = 400


@dataclasses.dataclass
class PipelineConfig:
    workdir: str = "runs"
    sim: SimConfig = dataclasses.field(default_factory=SimConfig)
    attacks: AttackMenu = dataclasses.field(default_factory=AttackMenu)
    dataset: DatasetConfig = dataclasses.field(default_factory=DatasetConfig)
    binary_params: GbdtParams = None
    multiclass_params: GbdtParams = None
    student_params: GbdtParams = None
    kd: KDConfig = dataclasses.field(default_factory=KDConfig)
    kd_cache: bool = True
    bench: BenchConfig = dataclasses.field(default_factory=BenchConfig)

    def scenario_spec(self, mode: str) -> AttackSpec:
        """The AttackSpec a named scenario runs under."""
        if mode not in MODES:
            raise ConfigError(f"unknown scenario {mode!r}; pick one of {MODES}")
        a = self.attacks
        onset = a.dos_onset if mode == "DoS" else a.onset
        return AttackSpec(mode=mode, t_a=onset, targets=a.targets,
                          b=a.bias, r=a.ramp_slope, r_s=a.slow_slope,
                          amplitude=a.amplitude,
                          omega_a=2.0 * math.pi * a.f_a,
                          alpha_s=a.alpha_s, a_stealth=a.a_stealth,
                          stealth_seed=a.stealth_seed)

    def scenario_sim(self, mode: str) -> SimConfig:
        """Per-scenario SimConfig; the noise seed is offset by the class.

        Distinct seeds keep the seven scenarios' normal segments from
        being byte-for-byte duplicates of each other in the merged set.
        """
        noise = dataclasses.replace(self.sim.noise,
                                    seed=self.sim.noise.seed + CLASS_OF_MODE[mode])
        return dataclasses.replace(self.sim, noise=noise)


# section -> known keys; parsing rejects anything else
_KNOWN = {
    "paths": {"workdir"},
    "sim": {"dt", "t_end", "ctrl_period", "f_nominal", "v_nominal"},
    "droop": {"m", "n", "p_star", "q_star"},
    "secondary": {"k_p", "k_q", "c_f", "c_v"},
    "graph": {"ring_weight"},
    "plant": {"tau_p", "tau_q", "p_load", "q_load", "bus_groups"},
    "noise": {"ripple_amp_v", "ripple_amp_i", "f_sw", "quant_step_v",
              "quant_step_p", "quant_step_f", "jitter_max", "seed"},
    "attacks": {"targets", "onset", "dos_onset", "bias", "ramp_slope",
                "slow_slope", "amplitude", "f_a", "alpha_s", "a_stealth",
                "stealth_seed"},
    "dataset": {"normal_keep_fraction", "onset_guard", "downsample_seed",
                "split_seed", "train_ratio", "val_ratio", "test_ratio",
                "to_float32", "rescale"},
    "train.binary": {"num_iterations", "learning_rate", "num_leaves",
                     "max_bins", "min_samples_leaf", "lambda_l2",
                     "feature_fraction", "bagging_fraction", "bagging_freq",
                     "early_stopping_rounds", "seed"},
    "train.multiclass": None,  # same keys as train.binary
    "train.student": None,
    "distill": {"alpha", "beta", "temperature", "cache"},
    "bench": {"batch_rows", "repetitions", "warmup", "demo_rows",
              "demo_seed", "trajectory_rows"},
}
_KNOWN["train.multiclass"] = _KNOWN["train.binary"]
_KNOWN["train.student"] = _KNOWN["train.binary"]


class _Section:
    """Typed reads over one parsed section with ConfigError reporting."""

    def __init__(self, parser, name):
        self.name = name
        self.raw = dict(parser[name]) if parser.has_section(name) else {}

    def _get(self, key, conv, default):
        if key not in self.raw:
            return default
        text = self.raw[key]
        try:
            return conv(text)
        except (ValueError, TypeError):
            raise ConfigError(
                f"[{self.name}] {key} = {text!r}: not a valid value") from None

    def num(self, key, default):
        return self._get(key, float, default)

    def integer(self, key, default):
        return self._get(key, lambda s: int(s, 0), default)

    def boolean(self, key, default):
        def conv(s):
            s = s.strip().lower()
            if s in ("true", "yes", "on", "1"):
                return True
            if s in ("false", "no", "off", "0"):
                return False
            raise ValueError(s)
        return self._get(key, conv, default)

    def text(self, key, default):
        return self._get(key, str, default)

    def vector(self, key, default):
        """A scalar or a comma-separated list of floats."""
        def conv(s):
            parts = [p for p in s.split(",") if p.strip()]
            if len(parts) == 1:
                return float(parts[0])
            return tuple(float(p) for p in parts)
        return self._get(key, conv, default)


def _parse_targets(text: str) -> tuple:
    out = []
    for piece in text.split(","):
        piece = piece.strip()
        if not piece:
            continue
        if "-" in piece:
            lo, hi = piece.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(piece))
    if not out:
        raise ValueError(text)
    return tuple(out)


def _parse_groups(text: str) -> tuple:
    """'1-4; 5-7; 8-10' -> zero-based index tuples."""
    groups = []
    for span in text.split(";"):
        groups.append(tuple(i - 1 for i in _parse_targets(span)))
    return tuple(groups)


def _parse_profile(text: str) -> LoadProfile:
    points = []
    for piece in text.split(","):
        piece = piece.strip()
        if not piece:
            continue
        t, v = piece.split(":", 1)
        points.append((float(t), float(v)))
    return LoadProfile(tuple(points))


def _gbdt_section(sec: _Section, objective: str, base: GbdtParams) -> GbdtParams:
    return GbdtParams(
        objective=objective,
        num_class=7 if objective == "multiclass" else 2,
        num_iterations=sec.integer("num_iterations", base.num_iterations),
        learning_rate=sec.num("learning_rate", base.learning_rate),
        num_leaves=sec.integer("num_leaves", base.num_leaves),
        max_bins=sec.integer("max_bins", base.max_bins),
        min_samples_leaf=sec.integer("min_samples_leaf", base.min_samples_leaf),
        lambda_l2=sec.num("lambda_l2", base.lambda_l2),
        feature_fraction=sec.num("feature_fraction", base.feature_fraction),
        bagging_fraction=sec.num("bagging_fraction", base.bagging_fraction),
        bagging_freq=sec.integer("bagging_freq", base.bagging_freq),
        early_stopping_rounds=sec.integer("early_stopping_rounds",
                                          base.early_stopping_rounds),
        seed=sec.integer("seed", base.seed),
    )


def parse_config(text: str) -> PipelineConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config syntax: {exc}") from None

    for section in parser.sections():
        if section not in _KNOWN:
            raise ConfigError(f"unknown config section [{section}]")
        for key in parser[section]:
            if key not in _KNOWN[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")

    paths = _Section(parser, "paths")
    sim = _Section(parser, "sim")
    droop = _Section(parser, "droop")
    secondary = _Section(parser, "secondary")
    graph = _Section(parser, "graph")
    plant = _Section(parser, "plant")
    noise = _Section(parser, "noise")
    attacks = _Section(parser, "attacks")
    dataset = _Section(parser, "dataset")
    distill_s = _Section(parser, "distill")
    bench = _Section(parser, "bench")

    droop_params = DroopParams(
        m=droop.vector("m", 1e-4),
        n=droop.vector("n", 1e-3),
        p_star=droop.vector("p_star", 5e3),
        q_star=droop.vector("q_star", 1e3),
    )
    gains = SecondaryGains(
        k_p=secondary.num("k_p", 12.0),
        k_q=secondary.num("k_q", 12.0),
        c_f=secondary.num("c_f", 10.0),
        c_v=secondary.num("c_v", 10.0),
    )
    plant_params = PlantParams(
        tau_p=plant.num("tau_p", 0.02),
        tau_q=plant.num("tau_q", 0.02),
        p_load=plant._get("p_load", _parse_profile,
                          LoadProfile(((0.0, 60e3), (0.2, 66e3)))),
        q_load=plant._get("q_load", _parse_profile,
                          LoadProfile(((0.0, 10.5e3),))),
        bus_groups=plant._get("bus_groups", _parse_groups,
                              ((0, 1, 2, 3), (4, 5, 6), (7, 8, 9))),
    )
    noise_cfg = NoiseConfig(
        ripple_amp_v=noise.num("ripple_amp_v", 0.001),
        ripple_amp_i=noise.num("ripple_amp_i", 0.02),
        f_sw=noise.num("f_sw", 9973.0),
        quant_step_v=noise.num("quant_step_v", 0.0),
        quant_step_p=noise.num("quant_step_p", 5.0),
        quant_step_f=noise.num("quant_step_f", 1e-3),
        jitter_max=noise.integer("jitter_max", 1),
        seed=noise.integer("seed", 42),
    )
    sim_cfg = SimConfig(
        dt=sim.num("dt", 1e-4),
        t_end=sim.num("t_end", 1.0),
        ctrl_period=sim.num("ctrl_period", 1e-3),
        omega_star=2.0 * math.pi * sim.num("f_nominal", 60.0),
        v_star=sim.num("v_nominal", 1.0),
        droop=droop_params,
        gains=gains,
        graph=ring_graph(graph.num("ring_weight", 1.0)),
        plant=plant_params,
        noise=noise_cfg,
    )
    menu = AttackMenu(
        targets=attacks._get("targets", _parse_targets, (1,)),
        onset=attacks.num("onset", 0.70),
        dos_onset=attacks.num("dos_onset", 0.25),
        bias=attacks.num("bias", 0.12),
        ramp_slope=attacks.num("ramp_slope", 0.75),
        slow_slope=attacks.num("slow_slope", 0.075),
        amplitude=attacks.num("amplitude", 0.12),
        f_a=attacks.num("f_a", 5.0),
        alpha_s=attacks.num("alpha_s", 0.5),
        a_stealth=attacks.num("a_stealth", 0.03),
        stealth_seed=attacks.integer("stealth_seed", 7),
    )
    ds = DatasetConfig(
        normal_keep_fraction=dataset.num("normal_keep_fraction", 0.12),
        onset_guard=dataset.num("onset_guard", 0.005),
        downsample_seed=dataset.integer("downsample_seed", 101),
        split=SplitSpec(
            train=dataset.num("train_ratio", 0.70),
            val=dataset.num("val_ratio", 0.15),
            test=dataset.num("test_ratio", 0.15),
            seed=dataset.integer("split_seed", 202),
        ),
        to_float32=dataset.boolean("to_float32", False),
        rescale=dataset.num("rescale", 1.0),
    )
    binary_base = GbdtParams(objective="binary", num_class=2, seed=303)
    multi_base = GbdtParams(objective="multiclass", num_class=7, seed=304)
    student_base = GbdtParams(objective="multiclass", num_class=7,
                              num_iterations=50, learning_rate=0.10,
                              num_leaves=15, feature_fraction=0.8,
                              bagging_fraction=0.8, bagging_freq=1,
                              early_stopping_rounds=0, seed=305)
    kd = KDConfig(
        alpha=distill_s.num("alpha", 0.05),
        beta=distill_s.num("beta", 0.95),
        temperature=distill_s.num("temperature", 1.0),
    )
    bench_cfg = BenchConfig(
        batch_rows=bench.integer("batch_rows", 1000),
        repetitions=bench.integer("repetitions", 12),
        warmup=bench.integer("warmup", 2),
        demo_rows=bench.integer("demo_rows", 10),
        demo_seed=bench.integer("demo_seed", 404),
        trajectory_rows=bench.integer("trajectory_rows", 400),
    )
    return PipelineConfig(
        workdir=paths.text("workdir", "runs"),
        sim=sim_cfg,
        attacks=menu,
        dataset=ds,
        binary_params=_gbdt_section(_Section(parser, "train.binary"),
                                    "binary", binary_base),
        multiclass_params=_gbdt_section(_Section(parser, "train.multiclass"),
                                        "multiclass", multi_base),
        student_params=_gbdt_section(_Section(parser, "train.student"),
                                     "multiclass", student_base),
        kd=kd,
        kd_cache=distill_s.boolean("cache", True),
        bench=bench_cfg,
    )


def load_config(path) -> PipelineConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)


def default_config() -> PipelineConfig:
    return parse_config(DEFAULT_CONFIG)


def write_default_config(path):
    with open(path, "w") as fh:
        fh.write(DEFAULT_CONFIG)
