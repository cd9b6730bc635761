"""Delay dynamic equations on time scales: simulation and stability certificates."""

from .engine import (
    DelayEquation,
    FundamentalField,
    History,
    alpha_inv,
    alpha_star,
    fundamental_solution,
    solve_ivp,
    variation_of_parameters,
)
from .expr import Expr, evaluate, parse
from .stability import ConditionReport, StabilityCertificate, classify
from .timescale import DenseInterval, Grid, GridFunction, IsolatedPoint, TimeScale, build_grid, delta_integral, mu, rho, sigma
from .tsexp import check_regressive, circle_minus, circle_plus, exp_fn, exp_ominus

__all__ = [
    "ConditionReport",
    "DelayEquation",
    "DenseInterval",
    "Expr",
    "FundamentalField",
    "Grid",
    "GridFunction",
    "History",
    "IsolatedPoint",
    "StabilityCertificate",
    "TimeScale",
    "alpha_inv",
    "alpha_star",
    "build_grid",
    "check_regressive",
    "circle_minus",
    "circle_plus",
    "classify",
    "delta_integral",
    "evaluate",
    "exp_fn",
    "exp_ominus",
    "fundamental_solution",
    "mu",
    "parse",
    "rho",
    "sigma",
    "solve_ivp",
    "variation_of_parameters",
]
