"""Spectra and scalar functional calculus on block-diagonal elements.

Walks through the basic substrate: build elements of a direct sum of matrix
blocks, read off spectra, and push scalar functions through the
eigendecomposition.
"""

import numpy as np

from cprank import (
    AlgebraElement,
    FiniteDimAlgebra,
    apply_function,
    cutoff_below,
    indicator_above,
    inverse_above_gap,
    spectrum,
    support_projection,
    validate,
)

# an algebra with a 2x2 and a 3x3 block, and a hermitian element of it
alg = FiniteDimAlgebra([2, 3])
a = AlgebraElement(
    alg,
    [
        np.array([[0.3, 0.1], [0.1, 0.9]]),
        np.diag([0.05, 0.5, 0.95]),
    ],
)
print("block sizes:", alg.block_sizes)
print("merged spectrum:", np.round(spectrum(a), 4))

# the cutoff function vanishes below alpha and follows the identity above
# alpha + eps; on a positive contraction it moves the element by at most eps
h = AlgebraElement(FiniteDimAlgebra([3]), [np.diag([0.1, 0.5, 0.9])])
moved = apply_function(h, cutoff_below(0.2, 0.2))
print("cutoff of diag(0.1, 0.5, 0.9):", np.round(np.diag(moved.blocks[0]).real, 4))
print("distance moved:", (moved - h).norm())

# with a two-cluster spectrum the indicator of [1/2, inf) is a projection
gap = AlgebraElement(FiniteDimAlgebra([2]), [np.diag([0.05, 0.95])])
p = apply_function(gap, indicator_above(0.5))
print("projection verdict:", validate(p, "projection", 1e-12).ok)

# and the inverse on the upper cluster inverts the element on its range
inv = apply_function(gap, inverse_above_gap(0.1))
print("inv * h equals the spectral projection:", ((inv @ gap) - p).norm() < 1e-12)

# support projections act as units on positive elements
pos = AlgebraElement(FiniteDimAlgebra([3]), [np.diag([0.0, 0.2, 0.7])])
supp = support_projection(pos)
print("support rank:", int(np.trace(supp.blocks[0]).real))
print("unit action defect:", ((supp @ pos) - pos).norm())
