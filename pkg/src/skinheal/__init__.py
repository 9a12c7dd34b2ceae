"""Non-Bloch band theory and self-healing of skin modes in 1D non-Hermitian lattices."""

from .config import RunConfig, emit_config, emit_json, load_config, parse_config
from .errors import (BlowUpError, ConfigError, DegeneracyError, DomainError, EmptyGbzError,
                     NotASkinEnergyError, NumericalError, RefineKError, SkinHealError,
                     WindingUndefinedError)
from .evolution import (Box, EvolutionTrace, EvolveParams, HealingObservation, Observed, PotentialSpec,
                        classify_healing, deviation_tail_check, epsilon, evolve, growth_rate,
                        potential_at, rk4_step, tail_decay_check)
from .laurent import LaurentSymbol, RootSet, char_roots, laurent_eval, modulus_rank, sort_roots
from .models import (SingleBandModel, TruncatedHamiltonian, TwoChainModel, bloch_matrix,
                     build_truncated, char_roots_multiband)
from .skin_modes import (SkinMode, build_skin_mode, build_skin_mode_multiband, build_skin_modes,
                         eigen_residual)
from .spectra import (GbzSet, Grid, Healing, HealingPrediction, PbcLoop, Region, SibcClass,
                      ThresholdReport, compute_threshold, default_grid, obc_gbz_scan, pbc_spectrum,
                      predict_self_healing, sibc_classify, threshold_for, winding_integral,
                      winding_integral_adaptive, winding_roots)

__version__ = "0.1.0"
