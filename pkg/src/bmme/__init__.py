"""Block majorization-minimization with extrapolation for beta-NMF and min-vol KL-NMF."""

from .beta_nmf import BetaNmfConfig, FactorPair, kkt_residual, mu_step, solve_mu, solve_mue
from .core import BlockProblem, RunConfig, check_accumulated_bound, iterate, run
from .divergence import D_beta, d_beta, grad_H, grad_W, rel_error_minvol, rel_objective_beta
from .extrapolation import ExtrapolationState, next_alpha_raw, project_nonneg_diff, safeguarded_alpha
from .matrixio import ConvergenceTrace, SyntheticSpec, read_matrix, read_trace, synth_lowrank, write_matrix, write_trace
from .minvol import MinVolConfig, minvol_h_step, minvol_w_step, solve_minvol

__version__ = "0.1.0"

__all__ = [
    "BetaNmfConfig",
    "BlockProblem",
    "ConvergenceTrace",
    "ExtrapolationState",
    "FactorPair",
    "MinVolConfig",
    "RunConfig",
    "SyntheticSpec",
    "D_beta",
    "check_accumulated_bound",
    "d_beta",
    "grad_H",
    "grad_W",
    "iterate",
    "kkt_residual",
    "minvol_h_step",
    "minvol_w_step",
    "mu_step",
    "next_alpha_raw",
    "project_nonneg_diff",
    "read_matrix",
    "read_trace",
    "rel_error_minvol",
    "rel_objective_beta",
    "run",
    "safeguarded_alpha",
    "solve_minvol",
    "solve_mu",
    "solve_mue",
    "synth_lowrank",
    "write_matrix",
    "write_trace",
]
