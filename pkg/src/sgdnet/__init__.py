"""SGD on over-parameterized two-layer networks over linearly separable data:
trainer, bound calculators, counterexample constructions and experiment harness.
"""
from .core import (ActivationKind, EpochStats, Example, LabeledDataset, NetworkParams, RunRecord,
                   TrainConfig, TrajectoryPoint, seeded_rng)
from .network import (activation, critical_point_report, forward, hinge_loss, nonconvexity_witness,
                      subgradient, zero_one_error)
from .trainer import (BoundedRows, DefaultCorollary2, Explicit, SymmetricBox, initialize, sgd_step,
                      train, trajectory_diagnostics)

__version__ = "0.1.0"
