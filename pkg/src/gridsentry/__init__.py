"""Microgrid secondary-control attack simulation and detection toolkit.

The pieces, in pipeline order: a ten-generator droop/consensus simulator
(`simulate`), false-data injection on the exchanged correction signals
(`attacks`), dataset assembly (`pipeline`, `tables`), a histogram
gradient-boosting learner (`gbdt`), knowledge distillation (`distill`),
and the evaluation bench (`evalbench`).  `cli` ties them together.
"""

from .attacks import CLASS_OF_MODE, MODES, AttackSpec, apply_attack
from .errors import (ConfigError, GridSentryError, SchemaError,
                     SimulationDiverged)
from .params import (CommGraph, DGState, DroopParams, LoadProfile,
                     NoiseConfig, PlantParams, SecondaryGains, SimConfig,
                     ring_graph)
from .simulate import run_scenario, simulate
from .tables import FEATURE_COLUMNS, SCHEMA, SampleTable, read_csv, write_csv

__version__ = "0.1.0"

__all__ = [
    "AttackSpec", "CLASS_OF_MODE", "CommGraph", "ConfigError", "DGState",
    "DroopParams", "FEATURE_COLUMNS", "GridSentryError", "LoadProfile",
    "MODES", "NoiseConfig", "PlantParams", "SCHEMA", "SampleTable",
    "SchemaError", "SecondaryGains", "SimConfig", "SimulationDiverged",
    "apply_attack", "read_csv", "ring_graph", "run_scenario", "simulate",
    "write_csv", "__version__",
]
