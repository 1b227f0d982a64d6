"""Numerical laboratory for quantized symplectic automorphisms of the torus."""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .symplectic import (IntSymplecticMatrix, adapted_frame, adapted_scaling_matrix,  # noqa: F401
                         check_quantizable, check_symplectic, diamond, ehrenfest_times,
                         entropy_bounds, lyapunov_data, parse_matrix)
from .torus import (QuantumTorus, TorusOperator, TorusState, coherent_state,  # noqa: F401
                    find_kappa, propagator, translation)
from .quantization import TrigObservable, anti_wick, op_plus, weyl  # noqa: F401
from .spectra import EigenData, MeasureGrid, eigensystem, husimi_grid, measure_of_state  # noqa: F401
from .entropy import (EntropyReport, build_partition, classical_entropy,  # noqa: F401
                      entropy_certificate, eup_check, quantum_entropy, refine)
