"""Distributed primal-dual stochastic approximation over random noisy networks."""

from ._accel import backend_name
from .asymptotics import AsymptoticModel, averaged_covariance, build_F, build_model, is_hurwitz, solve_lyapunov
from .config import ExperimentConfig, load_config, parse_config, sensor_config
from .engine import NoiseSpec, StepSchedule, SystemState, run, step
from .errors import ConfigError, DegenerateVariance, DPDSAError
from .harness import efficiency_study, normality_study, replicate_paper, run_monte_carlo
from .network import GraphDistribution, decompose, gossip_distribution, laplacian
from .problem import Ball, Box, FullSpace, Halfspace, AffineSlab, ProblemSpec, QuadraticCost, sensor_problem

__version__ = "0.1.0"
