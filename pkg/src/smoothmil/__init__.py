"""Attention MIL with graph-Laplacian smoothing of attention values.

Bags of ordered instances are classified by embedding every instance,
pooling with softmax attention and thresholding a sigmoid head. The
training objective mixes bag-level cross-entropy with a smoothness energy
on the unnormalized attention values over each bag's chain graph, so
neighboring instances learn similar attention. Everything runs on a small
tape-based reverse-mode autodiff engine over numpy float64 arrays.
"""

from .autodiff import Gradients, Tape, Tensor, check_gradient
from .baggraph import (
    BagGraph,
    chain_graph,
    energy_competition,
    energy_s1,
    energy_s2,
    energy_sum_form,
)
from .data import Bag, BagFileError, SynthConfig, generate, load_bags, save_bags, split
from .losses import LossConfig, cross_entropy, sa_loss, total_loss
from .model import (
    BagForward,
    ModelConfig,
    ModelParams,
    attention_pool,
    attention_values,
    attention_weights,
    embed,
    forward,
    pool_baseline,
)
from .training import (
    Adam,
    DivergenceError,
    EvalResult,
    RunReport,
    TrainConfig,
    auc,
    binary_metrics,
    evaluate,
    instance_scores,
    predict_bag,
    predict_instances,
    summarize_sweep,
    sweep,
    total_variation,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "Adam",
    "Bag",
    "BagFileError",
    "BagForward",
    "BagGraph",
    "DivergenceError",
    "EvalResult",
    "Gradients",
    "LossConfig",
    "ModelConfig",
    "ModelParams",
    "RunReport",
    "SynthConfig",
    "Tape",
    "Tensor",
    "TrainConfig",
    "attention_pool",
    "attention_values",
    "attention_weights",
    "auc",
    "binary_metrics",
    "chain_graph",
    "check_gradient",
    "cross_entropy",
    "embed",
    "energy_competition",
    "energy_s1",
    "energy_s2",
    "energy_sum_form",
    "evaluate",
    "forward",
    "generate",
    "instance_scores",
    "load_bags",
    "pool_baseline",
    "predict_bag",
    "predict_instances",
    "sa_loss",
    "save_bags",
    "split",
    "summarize_sweep",
    "sweep",
    "total_loss",
    "total_variation",
    "train",
]
