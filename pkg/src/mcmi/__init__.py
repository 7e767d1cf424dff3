"""Policy evaluation for discounted Markov reward processes.

TD(lambda), maximum likelihood, Monte Carlo matrix inversion (MCMI),
LSTD and least-squares MCMI, plus a general random-walk estimator for
(I - M)^-1 and an exact dense-solve oracle.
"""

from .exceptions import RankDeficientError, SingularSystemError, ValidationError
from .features import ExplicitFeatures, FeatureMatrix, GaussianFeatures, IdentityFeatures
from .inverse import (SplitMatrix, WalkOutcome, default_split, discounted_split, estimate_entry,
                      estimate_row, neumann_reference, run_walk, run_walks, split_from_parts)
from .least_squares import LSMCMI, LSTD, WeightVector, fit_weights, ls_mcmi_evaluate, lstd_evaluate
from .ml import MaximumLikelihood, MlModel, ml_update, ml_value
from .montecarlo import (MCMI, VisitedSet, WalkAccumulators, mcmi_evaluate, mcmi_single_state,
                         mcmi_variance_pred, mcmi_walk_estimates)
from .mrp import (Mrp, RewardModel, TransitionMatrix, ValueVector, exact_value, load_mrp,
                  make_mrp, random_mrp, rel_residual_error, save_mrp)
from .procedural import ProceduralMrp, procedural_mrp
from .rng import RngStream
from .sampling import SamplingStrategy, StepRecord, StepStream, sample_step, sample_stream
from .td import TDLambda, td_lambda

__version__ = "0.1.0"
