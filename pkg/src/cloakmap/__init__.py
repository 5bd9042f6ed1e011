"""Anisotropy-minimizing cloaking-by-mapping transformations on the annulus.

Subpackages:

* :mod:`cloakmap.core` - annulus geometry, push-forward tensors, trace formulas.
* :mod:`cloakmap.radial` - optimal radial amplitude profiles and energies.
* :mod:`cloakmap.variational` - 2D fields, energy functionals, optimality checks.
* :mod:`cloakmap.conformal` - conformal extension to non-circular cloaks.
* :mod:`cloakmap.cli` - command-line reporting front end.
"""

__version__ = "0.1.0"
