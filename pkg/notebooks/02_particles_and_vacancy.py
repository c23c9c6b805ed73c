# %% [markdown]
# # Particles and vacant cells
#
# A Poisson cloud of random walkers is drawn on a window large enough that
# particles from outside it are unlikely to matter, then evolved exactly.
# A cell is vacant when no particle sits on its site during its window.

# %%
import numpy as np

from evade import dynamics as dyn
from evade import percolation as pc
from evade.model import ModelParams

params = ModelParams(lam=0.2, speed=1.0)
window = dyn.make_window(params, depth=15)
real = dyn.sample_realization(params, window, seed=1)
print(window)
print("particles kept:", real.n_particles)

# %%
field = pc.compute_vacancy_field(real, 15)
for k in (0, 5, 10, 15):
    print(k, field.level_values(k).mean())

# %% [markdown]
# Thinning with the stored marks gives the same realization at a lower
# intensity; vacancy can only grow.

# %%
low = pc.compute_vacancy_field(real.thin(0.05), 15)
print("vacant cells at 0.2:", field.vacant().sum(), "at 0.05:", low.vacant().sum())
print("monotone:", bool(np.all(low.grid >= field.grid)))
