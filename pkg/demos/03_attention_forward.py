"""
From a bag of instances to one probability: the attention forward pass
======================================================================

A bag is classified in three moves: embed every instance, score each
embedding with a small attention network, and pool the embeddings with
the softmax of those scores before a sigmoid head reads out the label.
"""

import numpy as np

from smoothmil import (ModelConfig, ModelParams, SynthConfig, forward, generate,
                       predict_bag, predict_instances)

# One synthetic dataset: positive bags hide a contiguous run of shifted
# instances, negative bags are pure noise. Labels come with per-instance
# truth so localization can be judged later.
data_cfg = SynthConfig(num_bags=4, bag_size_range=(8, 10), feature_dim=6,
                       signal_dims=(0, 1), signal_shift=3.0,
                       run_length_range=(3, 4), seed=42)
bags = generate(data_cfg)
bag = next(b for b in bags if b.label == 1)
print(f"bag {bag.bag_id}: {bag.n} instances, label {bag.label}")
print("instance truth:", bag.instance_labels)

# Freshly initialized parameters: Glorot weights, zero biases.
params = ModelParams.init(ModelConfig(input_dim=6, embed_dims=(8,), att_dim=4),
                          seed=np.random.SeedSequence(0))

fw = forward(bag.features, params)
print("attention values f:", np.round(fw.f.data, 3))
print("attention weights s:", np.round(fw.s.data, 3), "(sum =", fw.s.data.sum(), ")")
print("bag probability:", round(fw.prob.item(), 4))

# The prediction rules are hierarchical: the bag decides first, and only a
# positive bag may flag instances — those whose weight strictly exceeds
# the uniform level 1/n.
bag_pred = predict_bag(fw, threshold=0.5)
print("bag prediction:", bag_pred)
print("instance predictions:", predict_instances(fw, bag_pred))

# max- and mean-pooling baselines share the embedding but skip attention,
# so they produce no per-instance weights at all.
for pooling in ("max", "mean"):
    alt = forward(bag.features, params, pooling)
    print(f"{pooling}-pooling probability: {alt.prob.item():.4f} "
          f"(attention weights: {alt.s})")
