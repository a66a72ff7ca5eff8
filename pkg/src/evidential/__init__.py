"""Evidential deep learning: Dirichlet and NIG uncertainty, losses, updates and a small trainer."""

from .dirichlet import DirichletParams
from .regression import NIGParams
from .special_fn import DomainError

__version__ = "0.1.0"

__all__ = ["DirichletParams", "NIGParams", "DomainError", "__version__"]
