"""Gradient-flow structures for nonlinear diffusion on finite reversible
Markov chains: nonlocal transport metrics, geodesics, entropy Hessians,
convexity constants, functional inequalities, and the discrete-to-continuum
comparison on tori."""

__version__ = "0.1.0"

from . import chain, convexity, entropy, flow, kernels, metric, torus, weights
from .chain import Density, MarkovChain, build_chain, cycle_chain, density, two_point_chain
from .entropy import heat_pair, hilbertian_pair, renyi_pair
from .metric import distance, geodesic_shoot
from .flow import solve_pme
from .weights import theta_log, theta_one, theta_power
