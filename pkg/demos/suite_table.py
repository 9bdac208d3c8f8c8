"""
The nine-run evaluation table
=============================

Three presets, three experiments each; the Code Red I experiments start
from 3, 2 and 4 origins.  Prints per-run edge counts and the mean precision
and recall of both parent rules.
"""

from wormtrace import run_suite, test_plan_configs

suite = run_suite(test_plan_configs(seeds=(1, 2, 3)))
print(suite.table())

# Background traffic is the main source of error: every extra benign flow
# is another chance for an infected host to look like a parent.
for rate in (0, 10, 50, 200):
    configs = test_plan_configs(seeds=(1, 2, 3))
    for c in configs:
        c.traffic.flow_rate_per_host = rate
    s = run_suite(configs).summary["all/extended"]
    print(f"{rate:>3} flows/s per host: precision {s['precision_mean']:.3f}, "
          f"origins {s['origin_success_rate']:.0%}")
