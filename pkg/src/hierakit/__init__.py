"""Numerical toolkit for observable and density-matrix hierarchies of Bose gases.

Layers, bottom up:

* :mod:`hierakit.tensor_core` dense k-particle operators, permutations, contractions;
* :mod:`hierakit.coefficients` exact bracket weights;
* :mod:`hierakit.hierarchy_algebra` hierarchy brackets, pairings and vector fields;
* :mod:`hierakit.functional_algebra` polynomial functionals, Poisson brackets, gradients;
* :mod:`hierakit.models_1d` the periodic 1-D Bose gas, BBGKY/GP/NLS;
* :mod:`hierakit.flows` time integrators;
* :mod:`hierakit.cli` the ``hierakit`` command.
"""

__version__ = "0.1.0"
