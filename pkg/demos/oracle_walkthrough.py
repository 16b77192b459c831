"""
Checking the solvers against brute force
========================================

Each solver has a slow, independent counterpart: grid searches over the
split ratio and power simplex, enumeration of every subchannel pairing,
and random sampling of source covariances. This script runs all of them
and prints the worst gap per suite.
"""

from collections import defaultdict

from swiet_relay.oracle import validate

reports = validate(seed=1)

# %%
worst = defaultdict(float)
failed = []
for r in reports:
    worst[r.scheme] = max(worst[r.scheme], r.relative_gap)
    if not r.passed:
        failed.append(r)

for scheme, gap in worst.items():
    print(f"{scheme:>12}: worst relative gap {gap:.2e}")

# %%
# Pairing and beam checks are one-sided: the solver may beat the oracle,
# it may not lose to it.
print("all passed" if not failed else f"{len(failed)} failures: {failed}")
