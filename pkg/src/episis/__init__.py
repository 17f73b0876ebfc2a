"""Adaptive-gain control of SIS epidemics on networks."""
from .dynamics import ConfigError, ControlConfig, SystemState, phi, rhs
from .integrator import IntegrationError, Trajectory, detect_limits, integrate
from .network import EpidemicNetwork, NetworkError, Partition, partition, toy6, validate
from .selection import SelectionResult, select
from .spectral import classify_m_matrix, is_hurwitz, reproduction_number, spectral_abscissa, spectral_radius
from .verify import BoundReport, run_checks

__version__ = "0.1.0"
