# # A miniature replication study
#
# Each replication draws a fresh dataset; every method sees the same draw.
# This is a scaled-down version of what `fiddle-ate simulate` runs.

from fiddle_ate.benchmark import format_table, run_benchmark
from fiddle_ate.config import preset

# %%
# Oracle baselines are cheap, so they get more replications.

oracle = run_benchmark(preset("desk"), [(2000, 100)], ["oracle_ipw", "oracle_aipw"], reps=50)
print(format_table(oracle))

# %%
# Networks at low and high dimension. Few replications and a narrow network,
# so expect noisy RMSE values.

conf = preset("desk", width=64, epochs=30)
nets = run_benchmark(conf, [(2000, 10), (2000, 500)], ["fiddle", "vanilla_nn"], reps=3)
print(format_table(nets))
