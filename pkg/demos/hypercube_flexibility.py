"""
Flexibility measures on a toy hypercube system
==============================================

Configurations are 6-bit strings, each task accepts a few target strings, and
adapting means flipping bits until a target is reached. Everything can be
enumerated, so exact values sit next to their Monte Carlo estimates.
"""

import numpy as np

from flexsys import formalism as fm
from flexsys.hypercube import hypercube_reference_system

# three tasks; the second accepts either of two configurations
system = hypercube_reference_system(6, [["000000"], ["111000", "000111"], ["101010"]],
                                    initial_config="010101")
context = system.context(weights=[0.5, 0.3, 0.2])

# cheapest switch between any pair of solutions, for every ordered task pair
print("min-reco matrix:\n", fm.min_reco_matrix(system, context))

# worst case looks at the most expensive pair, average case weighs pairs by the context
print("worst-case reconfigurability:", fm.worst_case_reconfigurability(system, context))
exact = fm.average_case_reconfigurability(system, context)
mc = fm.average_case_reconfigurability(system, context, n_samples=20_000, rng=1)
print(f"average-case: exact {exact.mean:.4f}, Monte Carlo {mc.mean:.4f} +/- {mc.stderr:.4f}")

# adaptability after histories of growing length approaches the average-case cost
for n in (0, 1, 2, 4, 8):
    a = fm.adaptability(system, context, n, 400, np.random.default_rng([3, n]))
    print(f"n={n}: adaptability {a.mean:.3f} +/- {a.stderr:.3f}")

# how many tasks fit into a budget, and how far apart they are
dist = system.target_distance()
for budget in (2, 5, 10, 20):
    r = fm.task_richness(system, context, budget, 300, 7)
    d = fm.task_diversity(system, context, dist, budget, 300, 7)
    print(f"budget {budget:>2}: richness {r.mean:.2f}, diversity {d.mean:.2f}")
