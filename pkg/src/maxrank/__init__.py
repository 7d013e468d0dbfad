"""Maximal-rank constant-coefficient operators: symbols, classification,
spectral solves on masked domains, Korn-type projections and a bench."""
from .symbols import (AnnihilatorPair, Classification, OperatorSpec, SamplingConfig, SpecError,
                      adjoint, classify, compose, delta_W, delta_W_true, eval_symbol,
                      generalized_laplacian, spec_from_json, spec_to_json, verify_annihilator)
from .catalog import catalog_annihilator, catalog_names, golden_entries, make_catalog_operator
from .grid import BoxGrid, GridField, Scheme
from .domains import DomainMask, family_mask, make_domain
from .spectral import apply_operator, build_pinv_multiplier, operator_multiplier, solve, solve_residual
from .norms import interior_residual, lp_norm, neg_sobolev_norm_2, sobolev_norm
from .projections import (EnsembleConfig, ProjectionResult, empirical_constant, helmholtz_decompose,
                          korn_project, weak_korn_project)

__version__ = "0.1.0"
