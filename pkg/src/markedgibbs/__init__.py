"""Marked Gibbs point processes: finite-volume kernels, MCMC, analytic bounds and diagnostics."""
from .bounds import BoundChain, assemble_chain
from .configuration import MarkedConfiguration
from .lattice import Window
from .model import ModelSpec, select_pq, validate_assumptions
from .oracle import brute_partition
from .refmeasure import SpinSampler, make_rng
from .sampler import Chain, KernelConfig

__all__ = ["BoundChain", "assemble_chain", "MarkedConfiguration", "Window", "ModelSpec", "select_pq",
           "validate_assumptions", "brute_partition", "SpinSampler", "make_rng", "Chain", "KernelConfig"]
__version__ = "0.1.0"
