"""H-infinity analysis and fixed-order synthesis for linear time-delay systems."""

from .exceptions import (DefectiveRootError, DimensionError,
                         DiscretizationLimitError, FrequencyResponseError,
                         LevelSingularityError, StabilizationError,
                         UnstableSystemError)
from .grad import (ClosedLoopGradient, ControllerGradient,
                   hinf_gradient_closed_loop, hinf_gradient_controller)
from .hinf import (HamiltonianTriple, HinfOptions, HinfResult, NepResidual,
                   build_hamiltonian_triple, correct_peaks, hinf_norm,
                   predict_norm)
from .model import (ClosedLoopSystem, ControllerRealization, SingularTriple,
                    TimeDelayPlant, assemble_closed_loop, evaluate_transfer,
                    max_singular_value)
from .optim import (OptimizerOptions, OptimizerTrace, SynthesisOptions,
                    SynthesisResult, minimize_nonsmooth, pack_controller,
                    synthesize, unpack_controller)
from .spectral import (DifferentiationMatrix, SpectralMesh, build_mesh,
                       differentiation_matrix, discretize_block_operator)
from .stability import (CharacteristicResidual, StabilityOptions,
                        StabilityReport, abscissa_gradient,
                        newton_correct_root, spectral_abscissa)

__version__ = "0.1.0"
