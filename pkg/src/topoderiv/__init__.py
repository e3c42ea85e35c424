"""Arbitrary-order topological derivatives of tracking-type cost functionals
constrained by a Poisson equation with a perturbed right-hand side.

Modules
-------
poly        exact sparse multivariate polynomials
moments     inclusion shapes, exact monomial moments, data jets
kernels     fundamental solutions and multipole far-field terms
potentials  pointwise Newton / biharmonic potentials of polynomial densities
fields      structured-grid fields, cost quadrature, point jets, masks
solver      finite-difference Poisson solves and the corrector cascade
expansion   coefficient assembly and the scale-function ladder
verify      epsilon sweeps, order fits, coefficient extraction
"""

__version__ = "0.1.0"
