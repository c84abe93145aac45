"""Gradient-flow calibrations for volume-preserving mean curvature flow.

Modules: ``geometry`` (shape oracles, grid interfaces), ``elliptic``
(Neumann solves), ``calibration`` (calibration construction), ``verifier``
(sampled certification), ``weakflow`` (thresholding and weak-solution
checks), ``entropy`` (relative entropy monitoring) and ``cli``.
"""
from .calibration import Calibration, CutoffProfile, construct_calibration, sphere_calibration
from .entropy import monitor, relative_entropy
from .errors import ConfigError, VPCalError
from .geometry import Balls, FourierCurve, Grid, IndicatorField, Sphere, discrete_interface
from .verifier import verify_calibration
from .weakflow import check_weak_solution, run_flow, thresholding_step

__version__ = "0.1.0"
