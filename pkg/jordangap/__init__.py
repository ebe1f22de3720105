"""
jordangap - sharp spectral gap conditions and inertial manifolds for
semilinear parabolic systems with a Jordan-block linear part.
"""

__version__ = "1.0.0"
