"""
How long must the window be?
============================

Each agent keeps only the last W milliseconds of incoming connections.  A
short window forgets the infecting connection before the outbreak signal
arrives; once W covers the whole epidemic, making it longer changes nothing.
"""

import numpy as np

from wormtrace import compare_paths, experiment_config
from wormtrace.simulation import simulate

windows = [20, 50, 100, 200, 500, 1000, 2000, 5000]
seeds = range(1, 11)

recall = np.zeros((len(windows), len(seeds)))
for j, seed in enumerate(seeds):
    for i, w in enumerate(windows):
        res = simulate(experiment_config("slammer", seed=seed, window_ms=w))
        recall[i, j] = compare_paths(res.ground_truth, res.reconstructions["extended"]).recall

for w, row in zip(windows, recall):
    print(f"W={w:>5} ms  recall {row.mean():.3f} ± {row.std(ddof=1):.3f}")
