"""Tour of the loss families over sequence log-probabilities.

Walks the chosen-response probability up while holding the rejected response
fixed, and prints what each objective does.  Run: python demos/01_loss_functions.py
"""

import math

from prefalign.losses import (
    Family,
    LogProbPair,
    LossParams,
    asft_align_loss,
    asft_total_loss,
    bt_preference_prob,
    log_odds,
    loss_value,
    logsigmoid,
)

# --- the two building blocks -------------------------------------------------

print("log sigmoid: a soft hinge, ~z for very negative z, ~0 for large z")
for z in (-20.0, -2.0, 0.0, 2.0, 20.0):
    print(f"  logsigmoid({z:+.0f}) = {logsigmoid(z):+.6f}")

print("\nlog-odds transform of a probability (the score fed to the align loss):")
for p in (0.01, 0.25, 0.5, 0.75, 0.99):
    print(f"  p = {p:.2f}  ->  log odds = {log_odds(math.log(p)):+.4f}")

# --- the alignment loss is absolute, not relative ----------------------------

print("\nalignment loss -log sigmoid(f(logp_w)) - log sigmoid(-f(logp_l))")
print("equals -log(x1) - log(1 - x2): each response is scored on its own.")
print(f"{'x1':>6} {'x2':>6} {'align':>10}")
for x1, x2 in [(0.1, 0.9), (0.5, 0.5), (0.9, 0.1), (0.99, 0.01)]:
    pair = LogProbPair(math.log(x1), math.log(x2))
    print(f"{x1:6.2f} {x2:6.2f} {asft_align_loss(pair):10.4f}")

print("\ntotal objective = SFT negative log-likelihood + beta * align (beta = 0.1):")
params = LossParams(family=Family.ASFT, beta=0.1)
for x1 in (0.2, 0.5, 0.9):
    pair = LogProbPair(math.log(x1), math.log(0.3))
    print(f"  x1 = {x1:.1f}: total = {asft_total_loss(pair, params):.4f}")

# --- contrast with the pairwise-comparison families ---------------------------

print("\npairwise families only see the GAP between the two responses;")
print("scaling both probabilities down leaves them unchanged:")
for family in (Family.BT, Family.DPO):
    params = LossParams(family=family, beta=1.0, alpha=1.0)
    close = LogProbPair(math.log(0.50), math.log(0.40), math.log(0.45), math.log(0.45))
    tiny = LogProbPair(math.log(0.050), math.log(0.040), math.log(0.045), math.log(0.045))
    print(
        f"  {family.value:>4}: loss(0.50 vs 0.40) = {loss_value(close, params):.4f}   "
        f"loss(0.050 vs 0.040) = {loss_value(tiny, params):.4f}"
    )
absolute = LossParams(family=Family.ASFT)
close = LogProbPair(math.log(0.50), math.log(0.40))
tiny = LogProbPair(math.log(0.050), math.log(0.040))
print(
    f"  asft: loss(0.50 vs 0.40) = {loss_value(close, absolute):.4f}   "
    f"loss(0.050 vs 0.040) = {loss_value(tiny, absolute):.4f}   <- absolute likelihoods matter"
)

# --- pairwise-comparison probability ------------------------------------------

print("\npairwise win probability sigma(score_i - score_j):")
for si, sj in [(0.0, 0.0), (1.0, 0.0), (3.0, 0.0)]:
    print(f"  scores ({si:.0f}, {sj:.0f}) -> P(i beats j) = {bt_preference_prob(si, sj):.4f}")
