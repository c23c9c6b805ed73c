# %% [markdown]
# # Cells and the space-time cone
#
# The target at level ``k`` may only sit on a site ``i`` with ``|i|_1 = k``
# during the time window ``[k/S, (k+1)/S]``.  A particle that was near cell
# ``x`` at some time in its window and then stays inside the cone of slope
# ``delta = S / (4 sqrt(d))`` can never reach a different cell in its window.

# %%
from evade.model import ModelParams, cell_of, level_sites, verify_cone_disjointness

params = ModelParams(lam=0.1, speed=1.0, dim=2)
print("cone slope", params.delta)
for k in range(3):
    print(k, len(level_sites(k)), cell_of(level_sites(k)[0], params))

# %% [markdown]
# Exhaustive check over launch sites up to level 20 and targets up to 40.

# %%
print(verify_cone_disjointness(params, 20, 40, 16))

# %% [markdown]
# A cone four times wider is no longer disjoint from the other cells.

# %%
print(verify_cone_disjointness(params, 20, 40, 16, delta=4 * params.delta))
