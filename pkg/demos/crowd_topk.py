"""Crowdsourced top-5 with and without adaptivity.

1000 questions with answer rates p ~ Beta(1, 5) and workers whose error
rates are uniform on [0, 1]. Every worker also answers 20 gold questions,
which pin down the sign of the worker direction. Both methods see the same
random answers in each trial. This short run takes well under a minute.
"""
from adaptive_spectral import ADAPTIVE, NONADAPTIVE, crowd_experiment, run_experiment

budgets = [2_000_000, 5_000_000]
trials = 20

exp = crowd_experiment(1000, 5, m_max_factor=None, measure_top2k=False)
points = run_experiment(exp, budgets, trials, root_seed=3)

print(f"exact top-5 error over {trials} trials")
print(f"{'budget':>10}  {'adaptive':>9}  {'uniform':>9}")
err = {(p.algorithm, p.budget): p.exact_topk_error_rate for p in points}
for b in budgets:
    print(f"{b:>10}  {err[ADAPTIVE, b]:9.2f}  {err[NONADAPTIVE, b]:9.2f}")
