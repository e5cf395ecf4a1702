"""From-scratch classifiers: linear SVM, random forest, MLP and CNN."""

from ._common import inverse_size_weights, softmax
from .adam import AdamState
from .checkpoint import load_model, save_model
from .cnn import CnnModel, cnn_forward, cnn_train, forward_trace, init_cnn, rehead
from .finetune import Round, RoundParams, fine_tune, make_rounds, smallest_first_schedule
from .forest import Forest, Tree, train_rfc
from .mlp import MlpModel, train_mlp
from .svm import LinearModel, hinge_objective, train_svm

__all__ = [
    "AdamState", "CnnModel", "Forest", "LinearModel", "MlpModel", "Round", "RoundParams", "Tree",
    "cnn_forward", "cnn_train", "fine_tune", "forward_trace", "hinge_objective", "init_cnn",
    "inverse_size_weights", "load_model", "make_rounds", "rehead", "save_model",
    "smallest_first_schedule", "softmax", "train_mlp", "train_rfc", "train_svm",
]
