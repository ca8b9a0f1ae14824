from dotenv import find_dotenv, load_dotenv

from .algorithms import (FitResult, StageTrace, dirty_fit, kkt_residual, l12_fit, lasso_fit, multistage_fit,
                         reweight, weighted_lasso_fit)
from .config.models import MultiStageConfig, SolverConfig, SyntheticSpec
from .core import TaskDataset, loss_gradient, loss_value, objective_value
from .data import generate_synthetic, load_csv, split_train_test

load_dotenv(find_dotenv())
