"""G x G-invariant Kahler metrics on complexified compact Lie groups.

Solves the Weyl-invariant Monge-Ampere equation on a Cartan subalgebra by
semi-discrete optimal transport and checks the resulting metrics against
closed-form examples.
"""

__version__ = "0.1.0"
