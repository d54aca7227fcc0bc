# %% [markdown]
# # Scenario reports
#
# Every scenario is a list of checks. Asserted checks decide pass/fail;
# informational ones are printed with "(info)".

# %%
from synthrank.experiments.scenarios import SCENARIOS, run_scenario

reports = {name: run_scenario(name) for name in SCENARIOS}
for name, r in reports.items():
    print(f"{name:<28} {'PASS' if r.passed else 'FAIL'}")

# %%
print(reports["metric-weight-sensitivity"].to_markdown())

# %% [markdown]
# Latency is measured in simulated milliseconds: link delays plus a
# processing cost model. Writes wait for three rounds of votes, reads hit
# one replica.

# %%
lat = reports["latency"].data
for label, row in lat["summary"].items():
    print(f"{label:<38} n={row['n']:<3} mean={row['mean']:7.2f}")
print(lat["mean_ms"], "excluded:", lat["excluded_purposes"])
