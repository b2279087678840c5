"""Covers of finite models: order, strict order, nerves, and the refinement.

The key picture: three arcs on a circle that pairwise intersect but share no
common point have order 1 yet strict order 2, and the level-set refinement
through the subdivided nerve brings the strict order down to the order.
"""

import numpy as np

from cprank import (
    Cover,
    barycentric_subdivision,
    circle_grid,
    cover_order,
    cover_strict_order,
    interval_grid,
    nerve,
    net_ball_cover,
    partition_of_unity,
    refines,
    strict_refinement,
)

circle = circle_grid(90)
arcs = Cover(
    [
        frozenset(range(0, 35)),
        frozenset(range(30, 65)),
        frozenset(list(range(60, 90)) + list(range(0, 5))),
    ]
)
print("arcs: order", cover_order(arcs), " strict order", cover_strict_order(arcs))

k = nerve(arcs)
print("nerve dimension:", k.dimension(), " faces:", sorted(map(sorted, k.faces)))
sd = barycentric_subdivision(k)
print("subdivision: vertices", len(sd.vertices), " dimension", sd.dimension())

refined = strict_refinement(circle, arcs)
print("refinement members:", len(refined.members))
print("refined strict order:", cover_strict_order(refined))
ok, witness = refines(refined, arcs)
print("refines the arcs:", ok)

# partitions of unity are built from distances to complements
interval = interval_grid(41)
chain = Cover(
    [
        frozenset(np.flatnonzero(interval.coords[:, 0] <= 0.6 + 1e-9).tolist()),
        frozenset(np.flatnonzero(interval.coords[:, 0] >= 0.4 - 1e-9).tolist()),
    ]
)
pou = partition_of_unity(interval, chain)
mid = 20
print("weights at the midpoint:", pou.weights[:, mid])

# net ball covers keep the multiplicity small at a chosen scale
for radius in (0.05, 0.15, 0.3):
    cov = net_ball_cover(interval, radius)
    ref = strict_refinement(interval, cov)
    print(
        f"net radius {radius}: members {len(cov.members)}, "
        f"order {cover_order(cov)}, refined strict order {cover_strict_order(ref)}"
    )
