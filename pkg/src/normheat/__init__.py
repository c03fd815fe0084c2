"""normheat, the mass-preserving nonlinear heat flow: solver, ground states and potential wells.

    du/dt = Delta u + g |u|^(2 sigma) u + mu[u] u,
    mu[u] = (|grad u|^2 - g |u|_{2 sigma + 2}^{2 sigma + 2}) / |u|^2

USAGE
    $ normheat evolve --config scenario.txt --out run1 > run1.manifest
    $ normheat sweep --config scenario.txt --param dt --values 1e-2,5e-3,2.5e-3

The library modules are importable on their own: ``grid``, ``functionals``,
``flow``, ``stationary``, ``wells``; ``scenario`` drives them from config
files and writes CSV artifacts and manifests.
"""

__version__ = '0.1.0'
