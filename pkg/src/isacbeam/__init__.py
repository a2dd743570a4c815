"""Secrecy-constrained transmit beampattern design for ISAC arrays."""
from .conic import SolverResult, SolverSettings
from .config import ScenarioConfig, load_config, reference_config, parse_config
from .designs import (DesignReport, SearchSettings, max_secrecy_rate, rank_one_extract,
                      secrecy_capacity, solve_optimal, solve_separate, solve_sensing_only, solve_zf)
from .errors import (ConfigError, DegenerateExtractionError, DomainError, ExtractionError,
                     InfeasibleError, NumericalError)
from .model import (BeamDesign, SampleGrid, Scene, Target, beampattern, desired_beampattern,
                    make_scene, matching_error, secrecy_rate, sinr_cu, sinr_eavesdropper,
                    steering_vector)

__version__ = "0.1.0"
