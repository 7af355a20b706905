"""Gaussian cross-classified multilevel models.

Specify models with a small formula language, diagnose how grouping
factors relate (nested, crossed, aliased), fit random-intercept models by
conjugate Gibbs sampling or by a dense maximum-likelihood oracle, simulate
from fully specified truths, and partition response variance across
classifications.
"""

from .data import (ClassificationMap, DataError, Dataset, StructureReport,
                   analyze_structure, encode_classification, read_table,
                   write_table)
from .design import DesignError, DesignSet, build_design, interaction_map
from .dyadic import DyadError, DyadFrame, build_dyad
from .estimators import CrossClassifiedGibbs, CrossClassifiedML, as_dataset
from .formula import (FormulaError, ModelFormula, RandomTerm, parse_formula,
                      render_formula)
from .oracle import (MarginalModel, MLFit, OracleError, ProfileFit,
                     VarianceComponents, blup, ml_fit, profile_loglik)
from .posterior import (SummaryTable, VPCReport, effective_sample_size,
                        split_rhat, summarize, vpc, vpc_shares)
from .sampler import (ChainState, DrawsMatrix, PriorSpec, SamplerError,
                      gibbs_fit, log_joint, parameter_names, read_draws,
                      write_draws)
from .simulate import (PairTruth, SimDesign, SimError, design_to_doc,
                       drop_cells, read_design, simulate)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # formula
    "FormulaError", "ModelFormula", "RandomTerm", "parse_formula",
    "render_formula",
    # data
    "DataError", "Dataset", "ClassificationMap", "StructureReport",
    "read_table", "write_table", "encode_classification", "analyze_structure",
    # design
    "DesignError", "DesignSet", "build_design", "interaction_map",
    # dyadic
    "DyadError", "DyadFrame", "build_dyad",
    # sampler
    "SamplerError", "PriorSpec", "ChainState", "DrawsMatrix", "gibbs_fit",
    "log_joint", "parameter_names", "write_draws", "read_draws",
    # oracle
    "OracleError", "VarianceComponents", "MarginalModel", "ProfileFit",
    "MLFit", "profile_loglik", "ml_fit", "blup",
    # posterior
    "SummaryTable", "VPCReport", "summarize", "vpc", "vpc_shares",
    "split_rhat", "effective_sample_size",
    # simulate
    "SimError", "SimDesign", "PairTruth", "simulate", "drop_cells",
    "read_design", "design_to_doc",
    # estimators
    "CrossClassifiedGibbs", "CrossClassifiedML", "as_dataset",
]
