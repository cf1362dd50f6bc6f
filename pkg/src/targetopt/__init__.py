"""Sequential target optimization with PCA/PLS dimension reduction."""

from .baselines import Nsga2Config, nsga2_run, nondominated_sort, random_search_run
from .dataspace import Dataset, ParameterSpace, TargetSpec, initial_design, in_target, standardize
from .errors import *  # noqa: F401,F403
from .optimizer import ApproachConfig, RunConfig, RunTrace, iterate, run
from .reduction import back_transform, feasible_interval, pca_target_centered, pls1_fit
from .regression import PolynomialModel, eq1_weights, fit_polynomial
from .rootsearch import fallback_maximin, real_roots
from .session import SessionState, init_state, suggest_observe_step
from .simbench import TestModel, evaluate_model, make_target, performance_quantiles, simulate

__version__ = "0.1.0"
