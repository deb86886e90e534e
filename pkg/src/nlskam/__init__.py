"""Numerical KAM iteration for a quintic lattice NLS with Gevrey data.

The package builds the seed Hamiltonian, runs certified Newton steps with
sparse polynomial algebra, and checks the resulting torus by integration.
"""

from .config import RunConfig, parse_config
from .engine import (KamState, RunReport, Schedule, invert_frequency_map, kam_step,
                     mode_cutoff, run, schedule_at, truncation_threshold)
from .errors import NlsKamError
from .hamiltonian import (Hamiltonian, NormalForm, NormWeights, TorusSpec, expand_j, norm,
                          plus_norm, resonant_project, split)
from .homological import FrequencyVector, diophantine_check, divisor, product_lower_bound, solve
from .lattice import (Monomial, lemma_a1_sides, lemma_h1_sides, momentum, momentum_star,
                      rearrangement, weight)
from .poisson import Caps, bracket, lie_transform
from .seed import GevreyProfile, build_seed, gevrey_sample, seed_norm_certificate

__version__ = "0.1.0"

__all__ = [
    "Caps", "FrequencyVector", "GevreyProfile", "Hamiltonian", "KamState", "Monomial",
    "NlsKamError", "NormWeights", "NormalForm", "RunConfig", "RunReport", "Schedule", "TorusSpec",
    "bracket", "build_seed", "diophantine_check", "divisor", "expand_j", "gevrey_sample",
    "invert_frequency_map", "kam_step", "lemma_a1_sides", "lemma_h1_sides", "lie_transform",
    "mode_cutoff", "momentum", "momentum_star", "norm", "parse_config", "plus_norm",
    "product_lower_bound", "rearrangement", "resonant_project", "run", "schedule_at",
    "seed_norm_certificate", "solve", "split", "truncation_threshold", "weight",
]
