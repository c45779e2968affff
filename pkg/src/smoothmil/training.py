"""Adam training with early stopping, prediction rules, metrics and sweeps."""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .autodiff import Tape, Tensor
from .baggraph import chain_graph
from .data import Bag
from .losses import LossConfig, cross_entropy, sa_loss, total_loss
from .model import BagForward, ModelConfig, ModelParams, forward


class DivergenceError(RuntimeError):
    """Objective became non-finite during optimization."""


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    batch_size: int = 4
    max_epochs: int = 200
    patience: int = 8
    alpha: float = 0.0
    sa_mode: str = "none"
    reduction: str = "sum"
    embed_dims: tuple = (16,)
    att_dim: int = 8
    pooling: str = "attention"
    bag_threshold: float = 0.5
    split_fractions: tuple = (0.7, 0.15, 0.15)
    seed: int = 0

    def __post_init__(self):
        for name in ("learning_rate", "batch_size", "max_epochs", "patience"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if not 0.0 < self.bag_threshold < 1.0:
            raise ValueError(f"bag_threshold must lie in (0, 1), got {self.bag_threshold}")
        self.loss_config()  # validates alpha / sa_mode / reduction

    def loss_config(self) -> LossConfig:
        return LossConfig(alpha=self.alpha, sa_mode=self.sa_mode, reduction=self.reduction)

    def model_config(self, input_dim: int) -> ModelConfig:
        return ModelConfig(input_dim=input_dim, embed_dims=tuple(self.embed_dims),
                           att_dim=self.att_dim, pooling=self.pooling)


@dataclass
class RunReport:
    model_tag: str
    alpha: float
    sa_mode: str
    train_losses: list = field(default_factory=list)
    val_losses: list = field(default_factory=list)
    best_epoch: int = 0
    stopped_epoch: int = 0
    scan_metrics: dict | None = None
    slice_metrics: dict | None = None
    attention_traces: list = field(default_factory=list)
    duration_sec: float = 0.0

    def to_dict(self, include_timing: bool = False) -> dict:
        out = {
            "model": self.model_tag,
            "alpha": self.alpha,
            "sa_mode": self.sa_mode,
            "train_losses": self.train_losses,
            "val_losses": self.val_losses,
            "best_epoch": self.best_epoch,
            "stopped_epoch": self.stopped_epoch,
            "scan_metrics": self.scan_metrics,
            "slice_metrics": self.slice_metrics,
            "attention_traces": self.attention_traces,
        }
        if include_timing:
            out["duration_sec"] = self.duration_sec
        return out


def model_tag(alpha: float, sa_mode: str) -> str:
    if alpha == 0.0 or sa_mode == "none":
        return "Att-MIL baseline"
    return f"smooth-attention-{sa_mode} (alpha={alpha:g})"


# ---------------------------------------------------------------------------
# optimizer


class Adam:
    """Standard Adam with bias correction; state is kept per parameter."""

    def __init__(self, params: Sequence[Tensor], lr: float = 1e-4,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self, grads: Sequence[np.ndarray]) -> None:
        if len(grads) != len(self.params):
            raise ValueError(f"got {len(grads)} gradients for {len(self.params)} parameters")
        self.t += 1
        for i, (p, g) in enumerate(zip(self.params, grads)):
            if g.shape != p.data.shape:
                raise ValueError(f"gradient shape {g.shape} does not match parameter {p.data.shape}")
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g
            m_hat = self.m[i] / (1.0 - self.beta1 ** self.t)
            v_hat = self.v[i] / (1.0 - self.beta2 ** self.t)
            p.data = p.data - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


# ---------------------------------------------------------------------------
# prediction rules and metrics


def predict_bag(fw_or_prob, threshold: float = 0.5) -> int:
    prob = fw_or_prob.prob.item() if isinstance(fw_or_prob, BagForward) else float(fw_or_prob)
    return int(prob >= threshold)


def predict_instances(fw: BagForward, bag_prediction: int) -> np.ndarray:
    """Hierarchical rule: a negative bag pins every instance to 0; in a
    positive bag an instance is flagged iff its weight strictly exceeds the
    uniform level 1/n."""
    if fw.s is None:
        raise ValueError("instance prediction is undefined for max/mean pooling (no attention weights)")
    s = fw.s.data
    if bag_prediction == 0:
        return np.zeros(s.shape[0], dtype=np.int64)
    return (s > 1.0 / s.shape[0]).astype(np.int64)


def binary_metrics(pred, truth) -> dict:
    """Accuracy, precision, recall, F1; ratios with a zero denominator are 0."""
    pred = np.asarray(pred, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if pred.shape != truth.shape:
        raise ValueError(f"got {pred.shape} predictions for {truth.shape} labels")
    tp = int(np.sum((pred == 1) & (truth == 1)))
    fp = int(np.sum((pred == 1) & (truth == 0)))
    fn = int(np.sum((pred == 0) & (truth == 1)))
    tn = int(np.sum((pred == 0) & (truth == 0)))
    pre = tp / (tp + fp) if tp + fp else 0.0
    rec = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2.0 * pre * rec / (pre + rec) if pre + rec else 0.0
    return {"acc": (tp + tn) / pred.size, "pre": pre, "rec": rec, "f1": f1}


def auc(scores, truth) -> float:
    """Rank-statistic AUC; tied scores contribute 1/2."""
    scores = np.asarray(scores, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.int64)
    n_pos = int(truth.sum())
    n_neg = truth.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both classes present")
    _, inverse, counts = np.unique(scores, return_inverse=True, return_counts=True)
    below = np.concatenate(([0], np.cumsum(counts)))[:-1]
    mean_ranks = below + (counts + 1) / 2.0  # 1-based, tie-averaged
    ranks = mean_ranks[inverse]
    return float((ranks[truth == 1].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def total_variation(values) -> float:
    """Within-bag roughness Σ|f_{i+1} - f_i| of an attention-value trace."""
    v = np.asarray(values, dtype=np.float64)
    return float(np.abs(np.diff(v)).sum()) if v.size > 1 else 0.0


# ---------------------------------------------------------------------------
# objective evaluation and training loop


def _objective(bags: Sequence[Bag], params: ModelParams, lcfg: LossConfig,
               pooling: str) -> tuple[Tensor, list[BagForward]]:
    fws = [forward(b.features, params, pooling) for b in bags]
    ce = cross_entropy([fw.prob for fw in fws], [b.label for b in bags], lcfg.reduction)
    if not lcfg.smoothing_active or pooling != "attention":
        return ce, fws
    sa = sa_loss([fw.f for fw in fws], [chain_graph(b.n) for b in bags],
                 lcfg.sa_mode, lcfg.reduction)
    return total_loss(ce, sa, lcfg.alpha), fws


def train(splits, cfg: TrainConfig, loss_cfg: LossConfig | None = None
          ) -> tuple[ModelParams, RunReport]:
    """Adam over shuffled bag batches with best-epoch checkpointing.

    Stops once the validation objective has not improved for ``patience``
    consecutive epochs and returns the parameters of the best epoch.
    """
    train_bags, val_bags, test_bags = splits
    if not train_bags or not val_bags:
        raise ValueError("train and validation splits must be non-empty")
    lcfg = loss_cfg if loss_cfg is not None else cfg.loss_config()
    mcfg = cfg.model_config(input_dim=train_bags[0].features.shape[1])
    params = ModelParams.init(mcfg, seed=np.random.SeedSequence([cfg.seed, 0]))
    adam = Adam(params.trainables(), lr=cfg.learning_rate)
    shuffle_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1]))

    report = RunReport(model_tag=model_tag(lcfg.alpha, lcfg.sa_mode),
                       alpha=lcfg.alpha, sa_mode=lcfg.sa_mode)
    started = time.perf_counter()
    best_val = np.inf
    best_params = params.copy()
    for epoch in range(1, cfg.max_epochs + 1):
        order = shuffle_rng.permutation(len(train_bags))
        batch_losses = []
        for lo in range(0, len(order), cfg.batch_size):
            batch = [train_bags[i] for i in order[lo:lo + cfg.batch_size]]
            with Tape() as tape:
                loss, _ = _objective(batch, params, lcfg, cfg.pooling)
            value = loss.item()
            if not np.isfinite(value):
                raise DivergenceError(
                    f"non-finite loss {value!r} at epoch {epoch}, batch {lo // cfg.batch_size}")
            gmap = tape.backward(loss)
            adam.step([gmap.wrt(p) for p in adam.params])
            batch_losses.append(value)
        report.train_losses.append(float(np.mean(batch_losses)))

        val_loss, _ = _objective(val_bags, params, lcfg, cfg.pooling)
        val_value = val_loss.item()
        if not np.isfinite(val_value):
            raise DivergenceError(f"non-finite validation loss at epoch {epoch}")
        report.val_losses.append(val_value)

        if val_value < best_val:
            best_val = val_value
            report.best_epoch = epoch
            best_params = params.copy()
        elif epoch - report.best_epoch >= cfg.patience:
            report.stopped_epoch = epoch
            break
        report.stopped_epoch = epoch

    result = evaluate(best_params, test_bags, pooling=cfg.pooling,
                      threshold=cfg.bag_threshold) if test_bags else None
    if result is not None:
        report.scan_metrics = result.scan_metrics
        report.slice_metrics = result.slice_metrics
        report.attention_traces = result.traces
    report.duration_sec = time.perf_counter() - started
    return best_params, report


# ---------------------------------------------------------------------------
# evaluation


@dataclass
class EvalResult:
    scan_metrics: dict
    slice_metrics: dict | None
    traces: list
    probs: list
    bag_preds: list


def instance_scores(s: np.ndarray) -> np.ndarray:
    """Attention weights rescaled by bag size so 1.0 is the decision level;
    makes instance scores comparable across bags of different sizes."""
    return s * s.shape[0]


def evaluate(params: ModelParams, bags: Sequence[Bag], pooling: str = "attention",
             threshold: float = 0.5) -> EvalResult:
    """Forward every bag, apply both prediction rules, compute both metric
    levels. Slice metrics are None without attention or instance labels;
    AUC entries are None when only one class is present."""
    probs, bag_preds, bag_truth = [], [], []
    traces = []
    inst_pred, inst_truth, inst_score = [], [], []
    for bag in bags:
        fw = forward(bag.features, params, pooling)
        p = fw.prob.item()
        pred = predict_bag(p, threshold)
        probs.append(p)
        bag_preds.append(pred)
        bag_truth.append(bag.label)
        if fw.s is None:
            continue
        s = fw.s.data
        trace = {
            "bag_id": bag.bag_id,
            "f": fw.f.data.tolist(),
            "s": s.tolist(),
            "threshold": 1.0 / bag.n,
            "bag_label": bag.label,
            "bag_pred": pred,
            "tv": total_variation(fw.f.data),
        }
        if bag.instance_labels is not None:
            trace["instance_labels"] = bag.instance_labels.tolist()
            inst_pred.extend(predict_instances(fw, pred).tolist())
            inst_truth.extend(bag.instance_labels.tolist())
            inst_score.extend(instance_scores(s).tolist())
        traces.append(trace)

    scan = binary_metrics(bag_preds, bag_truth)
    scan["auc"] = _maybe_auc(probs, bag_truth)
    slice_metrics = None
    if inst_truth:
        slice_metrics = binary_metrics(inst_pred, inst_truth)
        slice_metrics["auc"] = _maybe_auc(inst_score, inst_truth)
    return EvalResult(scan_metrics=scan, slice_metrics=slice_metrics, traces=traces,
                      probs=probs, bag_preds=bag_preds)


def _maybe_auc(scores, truth):
    try:
        return auc(scores, truth)
    except ValueError:
        return None


# ---------------------------------------------------------------------------
# alpha sweep


METRIC_COLUMNS = ("acc", "pre", "rec", "f1", "auc")


def _sweep_seed(master_seed: int, repeat: int) -> int:
    return int(np.random.SeedSequence([master_seed, repeat]).generate_state(1)[0])


def sweep(splits, base_cfg: TrainConfig, alphas: Sequence[float], modes: Sequence[str],
          repeats: int, master_seed: int, parallel: int = 1) -> list[dict]:
    """Train every (mode, alpha, repeat) combination on the given splits.

    Seeds are paired across the grid: repeat r uses one derived seed for all
    modes and alphas, so alpha comparisons within a repeat share their
    initialization and shuffling. Returns one row dict per run and level
    with keys mode, alpha, repeat, level, acc, pre, rec, f1, auc.
    """
    if repeats < 1:
        raise ValueError(f"repeats must be at least 1, got {repeats}")
    jobs = []
    for mode in modes:
        for alpha in alphas:
            for rep in range(repeats):
                cfg = replace(base_cfg, alpha=float(alpha), sa_mode=mode,
                              seed=_sweep_seed(master_seed, rep))
                jobs.append(((mode, float(alpha), rep), cfg))

    if parallel > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=parallel) as pool:
            reports = list(pool.map(_train_report, [(splits, cfg) for _, cfg in jobs]))
    else:
        reports = [_train_report((splits, cfg)) for _, cfg in jobs]

    rows = []
    for ((mode, alpha, rep), _), report in zip(jobs, reports):
        for level, metrics in (("scan", report.scan_metrics), ("slice", report.slice_metrics)):
            row = {"mode": mode, "alpha": alpha, "repeat": rep, "level": level}
            for key in METRIC_COLUMNS:
                row[key] = None if metrics is None else metrics.get(key)
            rows.append(row)
    return rows


def _train_report(args) -> RunReport:
    splits, cfg = args
    _, report = train(splits, cfg)
    return report


def summarize_sweep(rows: list[dict]) -> list[dict]:
    """Mean and population standard deviation per (mode, alpha, level)."""
    groups: dict[tuple, list[dict]] = {}
    for row in rows:
        groups.setdefault((row["mode"], row["alpha"], row["level"]), []).append(row)
    out = []
    for (mode, alpha, level), members in sorted(groups.items()):
        summary = {"mode": mode, "alpha": alpha, "level": level, "repeats": len(members)}
        for key in METRIC_COLUMNS:
            vals = [m[key] for m in members if m[key] is not None]
            summary[f"{key}_mean"] = float(np.mean(vals)) if vals else None
            summary[f"{key}_sd"] = float(np.std(vals)) if vals else None
        out.append(summary)
    return out
