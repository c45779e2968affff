"""Cross-entropy, smooth-attention penalties, and their convex mix."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from . import autodiff as ad
from .autodiff import Tensor
from .baggraph import BagGraph, energy_competition, energy_s1, energy_s2

PROB_EPS = 1e-12
SA_MODES = ("s1", "s2", "competition", "none")
REDUCTIONS = ("sum", "mean")

_ENERGY = {"s1": energy_s1, "s2": energy_s2, "competition": energy_competition}


@dataclass(frozen=True)
class LossConfig:
    alpha: float = 0.0
    sa_mode: str = "none"
    reduction: str = "sum"

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.sa_mode not in SA_MODES:
            raise ValueError(f"sa_mode must be one of {SA_MODES}, got {self.sa_mode!r}")
        if self.reduction not in REDUCTIONS:
            raise ValueError(f"reduction must be one of {REDUCTIONS}, got {self.reduction!r}")

    @property
    def smoothing_active(self) -> bool:
        return self.alpha > 0.0 and self.sa_mode != "none"


def cross_entropy(probs: Sequence[Tensor], labels: Sequence[int],
                  reduction: str = "sum") -> Tensor:
    """Negative log-likelihood of the bag labels under the predicted probs.

    Probabilities are clamped to [PROB_EPS, 1 - PROB_EPS] to keep the log
    finite at saturated sigmoids.
    """
    if len(probs) != len(labels):
        raise ValueError(f"got {len(probs)} probabilities for {len(labels)} labels")
    if not probs:
        raise ValueError("cross_entropy needs at least one bag")
    terms = []
    for prob, label in zip(probs, labels):
        if label not in (0, 1):
            raise ValueError(f"labels must be 0 or 1, got {label!r}")
        p = ad.clip(prob, PROB_EPS, 1.0 - PROB_EPS)
        terms.append(ad.neg(ad.log(p if label == 1 else ad.sub(1.0, p))))
    return _reduce(terms, reduction)


def sa_loss(att_values: Sequence[Tensor], graphs: Sequence[BagGraph], mode: str,
            reduction: str = "sum") -> Tensor:
    """Smoothness energy accumulated over bags."""
    if mode not in _ENERGY:
        raise ValueError(f"sa mode must be one of {tuple(_ENERGY)}, got {mode!r}")
    if len(att_values) != len(graphs):
        raise ValueError(f"got {len(att_values)} value vectors for {len(graphs)} graphs")
    if not att_values:
        raise ValueError("sa_loss needs at least one bag")
    energy = _ENERGY[mode]
    terms = [energy(f, g) for f, g in zip(att_values, graphs)]
    return _reduce(terms, reduction)


def total_loss(ce: Tensor, sa: Tensor, alpha: float) -> Tensor:
    """(1 - alpha) * ce + alpha * sa, returning the operands untouched at the
    boundaries so alpha = 0 recovers the plain cross-entropy objective."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    if alpha == 0.0:
        return ce
    if alpha == 1.0:
        return sa
    return ad.add(ad.mul(ce, 1.0 - alpha), ad.mul(sa, alpha))


def _reduce(terms: list, reduction: str) -> Tensor:
    if reduction not in REDUCTIONS:
        raise ValueError(f"reduction must be one of {REDUCTIONS}, got {reduction!r}")
    total = terms[0]
    for t in terms[1:]:
        total = ad.add(total, t)
    if reduction == "mean":
        total = ad.mul(total, 1.0 / len(terms))
    return total
