"""Numerical q-connections on the torus.

Lie groups and tangent groupoids over T^d, holonomies of band-limited
connections, q-connection families and their gauge and diffeomorphism
actions, the convolution representation on grid kernels, Weyl quantisation
with Dirac-condition sweeps, and Haar measures on graph systems.
"""

__version__ = "0.1.0"
