"""Kinetic evolution of interacting entities on a discrete state space.

Exact finite-N semigroups, the dual BBGKY hierarchy and its cumulant
expansion, the mean-field (Vlasov) limit, grand-canonical functionals and a
Gillespie simulator for cross-validation.
"""

__version__ = "0.1.0"

from .errors import ArityError, CapacityError, InvariantError, KineticsError, ModelError
from .model import InteractionModel, builtin, load_model, random_model, validate
from .state_space import EntityState, GradedSequence, StateSpace

__all__ = [
    "ArityError", "CapacityError", "EntityState", "GradedSequence", "InteractionModel",
    "InvariantError", "KineticsError", "ModelError", "StateSpace", "__version__", "builtin",
    "load_model", "random_model", "validate",
]
