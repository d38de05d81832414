"""Symbolic summation in difference rings built from nested sums and products.

The layers, bottom up: exact arithmetic over Q(params)(k), towers of
Pi-, root-of-unity and Sigma-generators, product representation, the base
first-order solver, parameterized telescoping in towers, and the summation
drivers with their expression language.
"""
from .errors import (
    FactorDegreeExceeded,
    InvalidProduct,
    MissingParameter,
    NoRecurrenceFound,
    NonExactDivision,
    NotAUnit,
    NotRewritable,
    ParseError,
    PoleEncountered,
    RingTelescopeError,
    ScopeError,
    SingularLeadingCoefficient,
    SolverInvariantError,
    SupportBoundExceeded,
    UnsupportedExpression,
)
from .exact_arith import Context, Factorization, RatFun, dispersion, factor_irreducible, get_context, resultant_k
from .expr import Expr, evaluate, parse_expression, to_text
from .fplde_base import FpldeProblem, degree_bound, denominator_bound, solve_fplde_rational
from .product_rep import HyperProduct, build_product_representation, merge_pi_generators
from .pt_solver import AdjoinNew, PtProblem, Telescoper, is_sigma_extension_needed, solve_fplde_tower, solve_pt
from .summation_api import (
    CompileOptions,
    Compiler,
    Recurrence,
    compile_expression,
    creative_telescope,
    decompile,
    solve_first_order_recurrence,
    telescope,
    verify_identity,
)
from .tower import Elem, Evaluator, Generator, SolutionBasis, Tower, eval_at, sigma, sigma_inverse

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
