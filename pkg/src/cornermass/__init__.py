"""cornermass: numerics for asymptotically flat initial data with corners.

Subpackages map onto the pipeline stages: ``numgrid`` (kernels),
``geometry`` (pointwise quantities of radial patches), ``corner`` (glued
data sets and scenarios), ``masses`` (ADM and quasilocal functionals),
``harmonic`` (the spacetime-harmonic solver and the mass-inequality
bookkeeping), ``extension`` (quasispherical extensions, mollification,
certificates), ``cli`` (command-line front end).
"""

__version__ = "0.1.0"
