"""Monte Carlo laboratory for a target evading mobile Poisson particles.

Modules, bottom up: ``model`` (sites, cells, cones), ``dynamics`` (particle
realizations), ``influence`` (cone exit data and influence regions),
``percolation`` (vacancy and blocked fields, oriented paths), ``evasion``
(trajectories, strategies, detection) and ``harness`` (experiments).
"""

__version__ = "0.1.0"

from .model import ModelParams, cell_of, level_sites, oriented_successors, verify_cone_disjointness  # noqa: E402
from .stats import derive_seed, wilson_interval  # noqa: E402

__all__ = ["ModelParams", "cell_of", "level_sites", "oriented_successors",
           "verify_cone_disjointness", "derive_seed", "wilson_interval", "__version__"]
