# %% [markdown]
# # Oriented vacant paths
#
# Reachable sets are pushed level by level; a path exists when the last
# level is reached.  The bottleneck value tells, for one realization, up to
# which thinned intensity a path survives.

# %%
from evade import dynamics as dyn
from evade import percolation as pc
from evade.model import ModelParams

params = ModelParams(lam=0.5, speed=1.0)
real = dyn.sample_realization(params, dyn.make_window(params, 20), seed=6)
field = pc.compute_vacancy_field(real, 20)
print(pc.reachable_counts(field))
print("path:", pc.find_oriented_vacant_path(field))
u = pc.path_bottleneck(field)
print("a path survives for lam <=", u * real.base_lam)

# %% [markdown]
# Path probability along a coupled intensity grid.

# %%
pp = pc.estimate_path_probability(ModelParams(0.1, 1.0), 15, 100, seed=7,
                                  lambdas=[0.02, 0.1, 0.5, 2.0])
for lam, est, ci in zip(pp.lambdas, pp.estimates, pp.intervals):
    print(lam, est, ci)
print("i.i.d. field at p=0.8:", pc.iid_path_probability(0.8, 15, 200, seed=8))
