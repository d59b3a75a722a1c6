"""Bingham moment closure for rod-like polymer orientation on the circle and sphere.

The closure maps a second-moment tensor ``M`` to the fourth moment ``Q`` of
the maximum-entropy (Bingham) distribution with that ``M``.  Expensive
parameter inversion is done once, offline, and stored as Legendre tables of
``eta(mu)``; run-time closure is an eigen-decomposition, a table lookup and a
rotation.
"""

from .biaxial import BiaxialTable, build_table_biaxial, close_3d, eval_eta123
from .circle import build_table, close_2d, eval_eta
from .dynamics import FlowParams, integrate, rhs
from .errors import ConvergenceError, DomainError, InputFormatError, NotUniaxialError, TableFormatError
from .piecewise import Table1D
from .tables import load_table, save_table
from .uniaxial import build_table_uni, close_3d_uniaxial, eval_eta_uni

__version__ = "0.1.0"

__all__ = [
    "BiaxialTable",
    "Table1D",
    "build_table",
    "build_table_uni",
    "build_table_biaxial",
    "eval_eta",
    "eval_eta_uni",
    "eval_eta123",
    "close_2d",
    "close_3d",
    "close_3d_uniaxial",
    "save_table",
    "load_table",
    "FlowParams",
    "rhs",
    "integrate",
    "ConvergenceError",
    "DomainError",
    "InputFormatError",
    "NotUniaxialError",
    "TableFormatError",
]
