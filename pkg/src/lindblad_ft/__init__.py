"""Entropy-production fluctuation theorems for Lindblad master equations.

Two independent engines over the same model description: exact evolution of
the tilted generating-function operator, and quantum-jump Monte Carlo with
per-jump bath-entropy accounting.
"""

__version__ = "0.1.0"

from .hilbert import DensityMatrix, Ket, Operator, eigh, expectation, tensor
from .model import (BathSpec, JumpChannel, LindbladModel, bosonic_rate,
                    build_two_spin_model, channel_entropy, channel_gap,
                    validate_model)
from .dynamics import (StateSeries, diag_heat_current, dual_dissipator,
                       evolve_density, lindblad_generator, second_law_gap,
                       von_neumann_entropy)
from .tilted import (TiltedSeries, TiltedState, evolve_tilted, ft_functional,
                     jarzynski_lhs, psi_bar_one, tilted_generator)
from .trajectories import (EntropyHistogram, InitialCondition, JumpEvent,
                           Trajectory, entropy_histogram, estimate_psi_one,
                           ft_estimators, iter_trajectories, jarzynski_estimator,
                           run_trajectory, sample_initial, system_entropy)
from .results import ResultSeries
from .harness import (ExperimentConfig, load_config, panel_config,
                      reproduce_panel, run_experiment, serialize_config)
