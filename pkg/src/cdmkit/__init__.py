"""Crowdsourcing diffusion mechanism (CDM) for data acquisition on social networks."""

from .allocation import DataContribution, layered_shapley, sampled_layered_shapley, shapley
from .diffusion import DiffusionMatrix, diffusion_contributions, reach_counts, total_diffusion
from .errors import CdmError
from .mechanism import (
    MechanismParams,
    PayoffReport,
    run_cdm,
    run_diff_eps,
    run_diff_shapley,
    run_nondiff_eps,
    run_nondiff_shapley,
)
from .network import (
    LayeredDag,
    Network,
    Report,
    generate_network,
    is_feasible,
    layerize,
    restrict_profile,
    truthful_profile,
)
from .valuation import (
    AtomicDatum,
    CoverageValuation,
    EntropyValuation,
    FeatureSchema,
    coverage_valuation,
    distribution,
    entropy_valuation,
)

__version__ = "0.1.0"
