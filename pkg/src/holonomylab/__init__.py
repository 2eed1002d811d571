"""Numerical laboratory for nonlinear parallel transport, holonomy loops,
curvature vector fields, bracket-closure algebras, and their matrix-group
counterparts.

Modules
-------
jets        truncated Taylor arithmetic + Richardson estimators
expressions tiny arithmetic-expression language for norms, fields, curves
finsler     Finsler norms, metric/spray/connection tables, metric catalog
transport   parallel transport ODE, holonomy of loops, parallelogram families
curvature   curvature vector fields, Berwald covariant derivative, generators
liealg      Lie brackets, numerical rank, bracket closure, inclusion chain
grouplab    matrix-group constructions (commutator, sum, scale, exp iteration)
cli         batch experiment runner over JSON configs
"""

__version__ = "0.1.0"
