"""Deterministic simulator for multi-DoF bilateral teleoperation over
delayed, lossy channels, with time-domain passivity control and SE(3)
drift compensation."""

from .channel import (ChannelSample, DelayKind, DelayLine, DelayProfile,
                      EnergyLedger, LossModel, Port, observed_energy)
from .drift import (CompGains, DriftState, compensation_velocity,
                    predicted_drift_decay, slave_reference_velocity,
                    step_compensation_only)
from .dynamics import (CartesianModel, OperatorScript, SlaveControllerGains,
                       pose_error, slave_force, step_cartesian, step_master)
from .errors import (ConfigError, FrameMismatch, NearPiRotation, NotSPD,
                     NotSkewSymmetric, OutOfDomain, SimulationError,
                     TeledriftError)
from .liegroup import (Frame, Pose, Rotation, Twist, a_inv, a_inv_transpose,
                       a_matrix, adjoint, exp_se3, exp_so3, hat,
                       integrate_body, integrate_spatial, log_so3, vee)
from .simrunner import (Metrics, ScenarioConfig, TickLog, TrajectorySpec,
                        run, sweep)
from .tdpa import (AdmittancePcResult, ImpedancePcResult, PcMode, PoState,
                   observe, pc_admittance_concatenated, pc_admittance_coupled,
                   pc_impedance_concatenated)

__version__ = "0.1.0"
