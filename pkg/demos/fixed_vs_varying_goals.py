"""
Fixed versus modularly varying goals, at a size that runs in about a minute
===========================================================================

Both scenarios pretrain a population, then adapt copies of it to unseen test
goals. FG always trains on the first training goal; MVG switches goal every
20 generations. Adaption cost is the number of generations until a circuit
reaches the success threshold; reconfiguration cost is the Hamming distance
between the pretrained best genotype and the first solver.

The full comparison is ``flexsys run`` with the ``desk`` preset.
"""

from flexsys import experiment as ex
from flexsys.config import load_config

config = load_config("desk", [
    "ga.pop_size=400",
    "experiment.seeds=3",
    "schedule.pretrain_generations=600",
    "ga.max_generations=300",
    'goals.test=["NAND(XOR,XOR)", "AND(AND,XOR)", "OR(XOR,OR)", "NOR(EQ,EQ)"]',
])

result = ex.run_experiment(config, progress=lambda done, total: print(f"unit {done}/{total}"))

# per-goal means, failures excluded and counted separately
for cell in result.stats.cells:
    print(f"{cell.scenario:>3} {cell.task:<14} ada {cell.mean_ada:7.2f}  reco {cell.mean_reco:6.2f}  "
          f"failed {cell.fail_frac:.2f}")

for line in ex.flexibility_report(result.records, config).lines():
    print(line)
