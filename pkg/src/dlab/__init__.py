"""Numerical toolkit for disentangler channels.

Modules
-------
qcore         states, operators, channels, sampling and serialisation
metrics       trace distance, fidelity and the inequalities between them
purenet       epsilon-nets of pure states and their covering radii
symsub        symmetric subspace and de Finetti approximations
sepkit        separable ensembles, fidelity/distance to SEP, EB membership
disentangler  the two constructions, their verifiers and size formulas
"""

__version__ = "0.1.0"
