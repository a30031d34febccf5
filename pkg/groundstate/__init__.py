"""Ground states of d-component coupled nonlinear Schrödinger systems.

-Delta u_i + lambda_i u_i = mu_i |u_i|^{2q-2} u_i + sum_{j != i} b_ij |u_j|^q |u_i|^{q-2} u_i

computed by minimizing the energy over the Nehari manifold on a radial grid.
"""

__version__ = "0.1.0"
