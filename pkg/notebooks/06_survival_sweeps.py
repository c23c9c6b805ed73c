# %% [markdown]
# # Survival sweeps and the crossing point
#
# Survival of each strategy over a coupled intensity grid, then the
# intensity where follower survival at a fixed depth drops through 1/2.
# That crossing is a finite-depth proxy, not the detection threshold.

# %%
from evade import harness as hs
from evade.model import ModelParams

cfg = hs.ExperimentConfig(ModelParams(0.1, 1.0), "percolation_follower", depth=20,
                          trials=200, master_seed=10,
                          lambda_grid=(0.01, 0.03, 0.1, 0.3, 1.0), coupled=True)
res = hs.run_survival(cfg)
print(res.to_csv())
print("monotonicity violations:", res.monotonicity_violations)

# %%
for s in (0.5, 1.0, 2.0):
    br = hs.estimate_lambda_det(s, cfg, depth=20)
    print(f"S={s}: crossing in [{br.lo:.4f}, {br.hi:.4f}] after {br.evaluations} evaluations")

# %% [markdown]
# The lemma oracles in one call.

# %%
rep = hs.run_lemma_suite(hs.ExperimentConfig(ModelParams(0.2, 1.0), trials=1000),
                         chi_samples=20_000)
print(rep.summary())
