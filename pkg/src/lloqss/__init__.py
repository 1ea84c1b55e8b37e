"""Simulation and key-rate analysis of continuous-variable quantum secret
sharing with a locally generated local oscillator."""

from .broadcast import decode_broadcast, encode_broadcast
from .compensation import (blockwise_compensation, compensate, estimate_cumulative_phase,
                           estimate_joint_phases,
                           first_rotation, second_rotation)
from .config import (ChannelGeometry, DetectorParams, SystemConfig, asymmetric_geometry,
                     place_users, symmetric_geometry, transmittance)
from .errors import (ConfigError, DegenerateDataError, IndeterminateAngleError,
                     InvalidArgumentError, NoPositiveRateError, NumericalDomainError)
from .keyrate import (KeyRateInputs, KeyRateReport, g_function, link_key_rate, plob_bound,
                      system_key_rate)
from .noise import NoiseBudget, chi_ref, noise_budget
from .optimize import (ScanSpec, max_distance, optimal_reference_intensity, run_scan,
                       tolerable_excess_noise)
from .protocol import run_protocol
from .quadrature import QuadPair, mean_product, random_stream, rotate, sample_gaussian_pair
from .simulation import (PhaseState, SimulationParams, dealer_measure, dealer_subtract,
                         estimate_transmittances, reference_phases, signal_drifts,
                         simulate_block)

__version__ = "0.1.0"
