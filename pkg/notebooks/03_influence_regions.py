# %% [markdown]
# # Last exit from the cone and regions of influence
#
# ``tau`` is the last time a walk started at the origin is outside the cone
# and ``chi`` the farthest it got by then.  The tail of ``chi`` is close to
# exponential, which keeps regions of influence small.

# %%
from evade import dynamics as dyn
from evade import influence as inf
from evade import percolation as pc
from evade.model import ModelParams

params = ModelParams(lam=0.0, speed=1.0)
sample = inf.sample_chi(params, 20_000, horizon=200.0, seed=3)
fit = inf.fit_exponential_tail(sample.uncensored_chi(), 5.0, 20.0)
print("censored", sample.censored_fraction, "rate", fit.rate, "residual", fit.residual)

# %% [markdown]
# Entry counts per site of a level compared with a Poisson tail.

# %%
rep = inf.lemma_n_count(ModelParams(0.1, 1.0), 5, 2000, seed=4)
print("mean count / lam:", rep.c_fit, "max site mean / lam:", rep.c_hat)
for row in rep.domination():
    print(row)

# %% [markdown]
# The blocked field built from the regions never marks a site open that the
# vacancy field marks occupied.

# %%
p = ModelParams(0.01, 1.0)
real = dyn.sample_realization(p, dyn.make_window(p, 12), seed=5)
e = pc.compute_vacancy_field(real, 12)
y = pc.compute_blocked_field(real, 12)
print("open in E:", int(e.vacant().sum()), "open in Y:", int((y.grid == 1).sum()),
      "Y > E anywhere:", bool((y.grid > e.grid).any()))
