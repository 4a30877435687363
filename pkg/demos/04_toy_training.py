"""Train the toy policy with reference-free and reference-based objectives.

Generates a separable preference dataset, runs short ASFT / ORPO / DPO runs
from the same seed, prints the likelihood-margin trajectories side by side,
and samples generations before and after training.
Run: python demos/04_toy_training.py  (takes ~30 s)
"""

from prefalign.losses import Family, LossParams
from prefalign.toylm import generate, generate_dataset, train

STEPS = 120
SEED = 7

dataset = generate_dataset(300, seed=3)
print(f"dataset: {len(dataset)} preference triples, e.g.")
for t in dataset[:2]:
    print(f"  prompt={' '.join(t.prompt)!r}  chosen={' '.join(t.chosen)!r}  rejected={' '.join(t.rejected)!r}")

runs = {}
policies = {}
for family, use_ref in ((Family.ASFT, False), (Family.ORPO, False), (Family.DPO, True)):
    params = LossParams(family=family)
    trajectory, policy = train(
        dataset, params, steps=STEPS, seed=SEED, lr=0.05, batch_size=32, use_reference=use_ref
    )
    runs[family.value] = trajectory
    policies[family.value] = policy
    note = "needs frozen reference" if use_ref else "reference-free"
    print(f"trained {family.value:>4} for {STEPS} steps ({note})")

print(f"\nlikelihood margin over training (corpus mean of logp_w - logp_l):")
header = f"{'step':>6}" + "".join(f"{name:>10}" for name in runs)
print(header)
for step in range(0, STEPS + 1, 20):
    row = f"{step:>6}"
    for trajectory in runs.values():
        row += f"{trajectory.records[step].margin:>10.4f}"
    print(row)

print("\nchosen-probability coordinate x1 (geometric mean), start vs end:")
for name, trajectory in runs.items():
    first, last = trajectory.initial, trajectory.final
    print(f"  {name:>4}: x1 {first.x1:.3e} -> {last.x1:.3e}   x2 {first.x2:.3e} -> {last.x2:.3e}")

print("\ngreedy generations after training (prompt 'q0 q1'):")
for name, policy in policies.items():
    tokens = generate(policy, ("q0", "q1"), max_len=5)
    print(f"  {name:>4}: {' '.join(tokens)}")
print("(the preferred word class dominates after preference training)")
