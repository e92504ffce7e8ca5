"""Relaxation gaps of detailed-balance quantum and classical generators.

Builds Lindbladians from a Gibbs state, jump operators and a kinetic matrix,
classical spin-flip generators, their Hermitian parent Hamiltonians and gaps,
and searches kinetic coefficients that maximize the gap at fixed cost.
"""

__version__ = "0.1.0"
