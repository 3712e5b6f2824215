"""billspec: eigenvalue clusters of periodic and branching billiard flows.

Modules: ``models`` (solvable operator catalogue), ``billiards`` (exact
billiard dynamics), ``scattering`` (interface reflection-refraction),
``kernels`` (sawtooth kernels and oscillatory sums), ``monodromy``
(monodromy matrices, cluster equation, counting correction), ``oracle``
(exact spectra, Weyl terms, remainder reports), ``experiments``/``cli``
(config-driven runs).
"""

__version__ = "0.1.0"
