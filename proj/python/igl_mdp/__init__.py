"""Latent-reward episodic MDP learning.

Thin wrapper over the compiled core: environment simulation, the
inverse-kinematics reward decoder, and occupancy-measure policy optimization.
"""

try:
    from ._igl_core import *  # noqa: F401,F403  (installed package layout)
    from ._igl_core import __doc__ as _core_doc
except ImportError:  # in-tree build: the module sits on sys.path directly
    from _igl_core import *  # noqa: F401,F403
    from _igl_core import __doc__ as _core_doc

__all__ = [
    "Env",
    "ConfigError",
    "EnvSpecError",
    "NumericalError",
    "IoError",
    "IdentifiabilityConstants",
    "synthetic_env",
    "env_from_file",
    "derive_constants",
    "ramp",
    "decode_reward",
    "sequential_product",
    "theory_params",
    "monte_carlo_posterior",
    "run_pipeline",
    "verify",
]
