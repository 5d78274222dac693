"""The attacker and defender reward curves over mean sensed voltage.

Both curves are the same offset Gaussian bell; the attacker's is the exact
negation of the defender's.  With the default parameters the sign flips at
exactly +/-5 % deviation from nominal, so a defender earns positive reward
only while the mean voltage stays within that corridor and an attacker only
once it has pushed the mean outside.
"""

from pathlib import Path

import numpy as np

from gridduel import RewardParams, emit_plot, reward

OUT = Path(__file__).parent / "out"

defender = RewardParams(agent_class="defender")
attacker = RewardParams(agent_class="attacker")

print(f"defaults: mu={defender.mu}  sigma={defender.sigma}  c={defender.c:.6f}\n")

print("mean_v   defender     attacker")
for x in np.arange(0.90, 1.1001, 0.025):
    print(f"{x:.3f}  {reward(defender, x):>10.5f}  {reward(attacker, x):>10.5f}")

for x in (0.95, 1.05):
    print(f"\nat mean voltage {x} both rewards cross zero: "
          f"defender={reward(defender, x):.2e}, attacker={reward(attacker, x):.2e}")

xs = np.linspace(0.85, 1.15, 301)
emit_plot([reward(defender, x) for x in xs], OUT / "defender_reward.svg",
          title="defender reward over mean voltage (0.85 .. 1.15 pu)",
          x_label="sample (0.85 + i/1000 pu)", y_label="reward")
emit_plot([reward(attacker, x) for x in xs], OUT / "attacker_reward.svg",
          title="attacker reward over mean voltage (0.85 .. 1.15 pu)",
          x_label="sample (0.85 + i/1000 pu)", y_label="reward")
print(f"\nwrote {OUT / 'defender_reward.svg'} and {OUT / 'attacker_reward.svg'}")
