"""A full attacker-vs-defender duel on the reference grid.

The attacker owns all six tap changers, the defender all generators and
loads; both sense every bus voltage and learn online from their own reward.
This trims the bundled poc experiment to 250 rounds (500 steps) so it runs
in under a second, then reports who got the upper hand and renders the
headline series as SVG charts.
"""

from dataclasses import replace
from pathlib import Path

from gridduel import compute_metrics, emit_plot, fixture_path, load_config_path, run_experiment

OUT = Path(__file__).parent / "out"
ROUNDS = 250

cfg = replace(load_config_path(fixture_path("poc.json")), rounds=ROUNDS)
print(f"running {cfg.name}: {cfg.rounds} rounds, seed {cfg.seed}, "
      f"agents {[a.id for a in cfg.agents]} ...")
log = run_experiment(cfg)
report = compute_metrics(log, cfg.performance)

print(f"\n{len(log.steps)} steps executed")
print(f"initial system performance: {log.initial_p_world:.4f}")
print(f"final   system performance: {report.p_world[-1]:.4f}")
print(f"mean voltage drifted {report.mean_voltage[0]:.4f} -> {report.mean_voltage[-1]:.4f} pu")

if report.attack_success_step is None:
    print("the hard voltage band was never broken")
else:
    print(f"attack success: a hard limit first broke at step {report.attack_success_step}")

for agent_id, series in report.cumulative_positive_rewards.items():
    print(f"cumulative positive rewards for {agent_id}: {series[-1]}")

phases = {}
for phase in report.operational_phase:
    phases[phase] = phases.get(phase, 0) + 1
print(f"operational phases visited: {phases}")

window = slice(max(0, len(report.mean_voltage) - 100), None)
emit_plot(report.mean_voltage[window], OUT / "duel_mean_voltage.svg",
          title=f"mean voltage, last 100 of {len(log.steps)} steps",
          x_label="step", y_label="mean v_pu", x_start=report.steps[window][0])
for agent_id, series in report.cumulative_positive_rewards.items():
    emit_plot(series, OUT / f"duel_positives_{agent_id}.svg",
              title=f"cumulative positive rewards: {agent_id}",
              x_label="step", y_label="count", x_start=1)
print(f"\nwrote charts under {OUT}/")
print("with the full 1000 rounds (gridduel run --config <poc.json>) the attacker")
print("reliably pins LV buses above 1.05 pu despite the defender.")
