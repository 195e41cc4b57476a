"""
Evolving a NAND circuit for a modular goal
==========================================

A genetic algorithm searches 100-bit genotypes that wire twelve NAND gates. The
goal is AND(XOR(x1,x2), XOR(x3,x4)); the run stops once some circuit
reproduces all sixteen rows of its truth table.
"""

import numpy as np

from flexsys import circuits as cc
from flexsys import evolution as ev

circuit = cc.CircuitParams()
ga = ev.GAParams(pop_size=1000, tournament_size=8, mutation_rate=0.02, max_generations=3000)
goal = cc.modular_goal(cc.GoalFamily.parse("AND(XOR,XOR)"))
print("goal table:", goal.to_string())

rng = np.random.default_rng(2)
population = ev.init_population(ga, circuit, rng)
result = ev.run_until_solved(population, goal, 1.0, ga, circuit, rng)
print("solved:", result.solved, "after", result.generations, "generations")

# best fitness every 25 generations
for rec in result.trace.records[::25]:
    print(f"gen {rec.gen:>4}: best {rec.best_f:.4f}, mean {rec.mean_f:.4f}")

if result.solved:
    topo = cc.decode(result.genotype, circuit)
    print("output reads source", topo.output_source)
    for i, (a, b) in enumerate(topo.gate_inputs):
        print(f"  gate {i:>2} (source {circuit.d + i:>2}) = NAND({a}, {b})")
    print("circuit table:", "".join(map(str, cc.genotype_table(result.genotype, circuit))))
