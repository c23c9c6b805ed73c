# %% [markdown]
# # Strategies against one realization
#
# The follower walks an oriented vacant path, one level per ``1/S``, so it
# is undetected until the last cell closes.  The other strategies are
# baselines.

# %%
from evade import dynamics as dyn
from evade import evasion as ev
from evade.model import ModelParams, level_end

params = ModelParams(lam=0.1, speed=1.0)
depth = 20
real = dyn.sample_realization(params, dyn.make_window(params, depth), seed=9)
horizon = level_end(depth, params.speed)
for name in ev.STRATEGIES:
    traj = ev.run_strategy(name, real, depth)
    if traj is None:
        print(name, "no vacant path")
        continue
    out = ev.detection_time(traj, real, horizon)
    print(f"{name:22s} admissible={bool(ev.check_admissible(traj, params.speed))} "
          f"detected={out.detected} time={out.time:.3f}")
