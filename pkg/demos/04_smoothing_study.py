"""
Training with and without the smoothness penalty
================================================

The mixed loss (1-α)·CE + α·energy rewards attention profiles that vary
gently along the chain. This script trains the α=0 baseline and an α=0.5
first-order run on the same data and seeds, then compares bag-level
metrics, instance-level metrics, and the within-bag total variation of
the attention values — the statistic that makes the smoothing visible.
"""

import numpy as np

from smoothmil import SynthConfig, TrainConfig, generate, split, train

data_cfg = SynthConfig(num_bags=80, bag_size_range=(10, 16), feature_dim=6,
                       signal_dims=(0, 1), signal_shift=2.0,
                       run_length_range=(3, 4), seed=5)
splits = split(generate(data_cfg), (0.7, 0.15, 0.15), seed=0)
print(f"bags: {len(splits[0])} train / {len(splits[1])} val / {len(splits[2])} test")

runs = {}
for alpha, mode in ((0.0, "none"), (0.5, "s1")):
    cfg = TrainConfig(learning_rate=5e-3, batch_size=4, max_epochs=40, patience=10,
                      alpha=alpha, sa_mode=mode, embed_dims=(8,), att_dim=4, seed=0)
    params, report = train(splits, cfg)
    runs[alpha] = report
    tv = float(np.mean([t["tv"] for t in report.attention_traces]))
    print(f"\n{report.model_tag}")
    print(f"  stopped at epoch {report.stopped_epoch} (best {report.best_epoch})")
    print(f"  scan  metrics: " + ", ".join(
        f"{k}={v:.3f}" for k, v in report.scan_metrics.items()))
    print(f"  slice metrics: " + ", ".join(
        f"{k}={v:.3f}" for k, v in report.slice_metrics.items()))
    print(f"  mean within-bag TV of attention values: {tv:.2f}")

# The penalty's direct effect is on the traces: the baseline's attention
# jumps from instance to instance, the smoothed run's barely moves. On
# easy synthetic data the baseline often localizes better — smoothing
# trades per-instance sharpness for the flatter profile it optimizes.
trace0 = runs[0.0].attention_traces[0]
trace5 = runs[0.5].attention_traces[0]
print(f"\nfirst test bag f, baseline : {np.round(trace0['f'], 2)}")
print(f"first test bag f, smoothed : {np.round(trace5['f'], 2)}")
