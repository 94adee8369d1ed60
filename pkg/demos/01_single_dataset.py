# # Estimating a treatment effect on one synthetic dataset
#
# Draw one dataset from the factor-driven benchmark design, then compare
# the oracle estimators (which see the true nuisance functions) with the
# factor-augmented network estimator.

import numpy as np

from fiddle_ate import DgpSpec, fit_fiddle, generate, oracle_aipw, oracle_ipw, preset

# %%
# 2000 rows, 300 covariates driven by 4 latent factors. The true ATE is 5.

syn = generate(DgpSpec(n=2000, p=300, seed=1))
data = syn.to_dataset()
print("treated:", data.n1, "control:", data.n0)
print("sample mean of tau*:", syn.tau_star.mean())

# %%
# Oracle baselines use pi*, mu0*, mu1* directly.

ipw = oracle_ipw(data.y, data.T, data.pi_star)
aipw = oracle_aipw(data.y, data.T, data.mu0_star, data.mu1_star, data.pi_star)
print(f"oracle IPW : {ipw.estimate:.4f}  CI [{ipw.ci_lo:.3f}, {ipw.ci_hi:.3f}]")
print(f"oracle AIPW: {aipw.estimate:.4f}  CI [{aipw.ci_lo:.3f}, {aipw.ci_hi:.3f}]")

# %%
# The network estimator. A reduced width and epoch count keep this under a
# minute; use preset("paper") for the full configuration.

conf = preset("desk", width=64, epochs=30, seed=3)
res = fit_fiddle(data, conf)
print(f"FIDDLE     : {res.estimate:.4f}  CI [{res.ci_lo:.3f}, {res.ci_hi:.3f}]")
print("rows used after the pretraining split:", res.n_used)
print("fraction of propensities clipped:", res.meta["pi_clipped_fraction"])
print("final training MSE per network:", {k: round(v, 4) for k, v in res.meta["final_train_mse"].items()})
