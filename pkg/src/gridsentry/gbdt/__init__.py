"""From-scratch histogram gradient boosting (binary and softmax multiclass)."""

from .binning import BinMapper, fit_bins
from .grow import Tree, best_split, grow_tree
from .model import (BoostedModel, GbdtParams, deserialize_model,
                    feature_importance_gain, load_model, predict_class,
                    predict_proba, predict_raw, save_model, serialize_model,
                    train, train_arrays)
from .objectives import (binary_grad_hess, binary_log_loss,
                         multiclass_log_loss, sigmoid, softmax,
                         softmax_grad_hess)

__all__ = [
    "BinMapper", "fit_bins", "Tree", "best_split", "grow_tree",
    "BoostedModel", "GbdtParams", "deserialize_model",
    "feature_importance_gain", "load_model", "predict_class",
    "predict_proba", "predict_raw", "save_model", "serialize_model",
    "train", "train_arrays",
    "binary_grad_hess", "binary_log_loss", "multiclass_log_loss",
    "sigmoid", "softmax", "softmax_grad_hess",
]
