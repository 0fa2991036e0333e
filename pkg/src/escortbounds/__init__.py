"""Generalized information inequalities with escort densities.

Bounds of Cramér-Rao, Bhattacharyya and Hammersley-Chapman-Robbins type
for a model f paired with an escort g, plus tools to verify attainment and
to construct optimizing escorts.
"""

__version__ = "0.1.0"

from .errors import (CatalogError, DomainError, EscortBoundsError, NodeError, NotPositiveDefinite,
                     QuadratureError, RegularityError, SupportError, SynthesisError)
from .numerics import NodeSet, QuadratureSettings, derivative, divided_difference, integrate
from .model import (CatalogEntry, EscortPair, ModelSpec, Statistic, Support, normalization_check,
                    unbiasedness_check)
from .catalog import catalog_lookup, catalog_names
from .linalg import cholesky, quadratic_form_inv, schur_complement
from .bounds import (BoundReport, ScoreSet, SearchSettings, bhattacharyya_dd, bhattacharyya_dd_sup,
                     bhattacharyya_regular, classical_cr, generalized_fisher, hcr_bound, multiparam_bound,
                     multiparam_dd_bound, naudts_bound, variance_of, vector_schur_bound)
from .escort import (DeformedFamily, SynthesizedDensity, deformed_pair, f_escort, synth_location, synth_scale,
                     verify_equality_condition)
from .verify import McSettings, attainment_suite, mc_expectation, reduction_suite

__all__ = [
    "CatalogEntry", "CatalogError", "BoundReport", "DeformedFamily", "DomainError", "EscortBoundsError",
    "EscortPair", "McSettings", "ModelSpec", "NodeError", "NodeSet", "NotPositiveDefinite", "QuadratureError",
    "QuadratureSettings", "RegularityError", "ScoreSet", "SearchSettings", "Statistic", "Support",
    "SupportError", "SynthesisError", "SynthesizedDensity", "attainment_suite", "bhattacharyya_dd",
    "bhattacharyya_dd_sup", "bhattacharyya_regular", "catalog_lookup", "catalog_names", "cholesky",
    "classical_cr", "deformed_pair", "derivative", "divided_difference", "f_escort", "generalized_fisher",
    "hcr_bound", "integrate", "mc_expectation", "multiparam_bound", "multiparam_dd_bound", "naudts_bound",
    "normalization_check", "quadratic_form_inv", "reduction_suite", "schur_complement", "synth_location",
    "synth_scale", "unbiasedness_check", "variance_of", "vector_schur_bound", "verify_equality_condition",
    "__version__",
]
