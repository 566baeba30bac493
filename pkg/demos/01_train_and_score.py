"""
Training ARO detectors and scoring a test split
===============================================

Generate one synthetic split shaped like the first reference dataset,
train detectors, then classify the held-out records.
"""

import numpy as np

from arofraud import GeneratorConfig, generate_splits
from arofraud.aro_detector import AroTrainParams, train
from arofraud.benchmark import evaluate_detectors

split = generate_splits(GeneratorConfig(seed=1), num_splits=1)[0]
print(split.train, split.test)

# detectors grow until the parent's fitness reaches the cut point
detectors = train(split.train, AroTrainParams(cut_point=0.1754, seed=1))
stats = detectors.train_stats
print(f"{len(detectors)} detectors after {stats['iterations']} buds "
      f"({stats['train_time_s'] * 1000:.1f} ms)")
print("parent fitness at each replacement:", np.round(stats["fitness_traces"][0], 4))

# threshold chosen on the training split's ROC curve
res = evaluate_detectors(detectors, split.test, split.train, threshold="roc")
print(f"threshold {res.threshold:.4f}")
print(res.report.to_json())

# the cut point itself as the threshold, for comparison
res_cut = evaluate_detectors(detectors, split.test, threshold="cut_point")
print("cut-point threshold:", res_cut.confusion)
