"""
tworing
Two-ring N=2 Landau-Ginzburg chiral ring: residue pairings, the coupling
operator C, Chebyshev reduction and the non-Abelian 2x2 Toda system.
"""

__version__ = '0.1.0'
