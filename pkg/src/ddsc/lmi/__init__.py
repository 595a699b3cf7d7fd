"""Embedded LMI toolkit: declarative modeling plus a conic interior-point core."""

from .assemble import AssembledProblem, LmiSolution, assemble, solve
from .logdet import maximize_logdet
from .model import AffineExpr, LmiProblem, bmat, hsym

__all__ = [
    "AffineExpr",
    "LmiProblem",
    "bmat",
    "hsym",
    "AssembledProblem",
    "LmiSolution",
    "assemble",
    "solve",
    "maximize_logdet",
]
