"""Completely positive approximations of function systems, both directions.

Forward: build a triple (F, psi, phi) with abelian F from evaluations and a
subordinate partition, with the approximation error controlled by the
oscillation of the targets over the cover used.  Backward: extract from a
good enough approximation an open cover of controlled order that refines a
given one, following the constant schedule C, beta, alpha, theta, eta and
verifying every named inequality along the way.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .algebra import AlgebraElement, FiniteDimAlgebra, eigh_canonical
from .covers import (
    Cover,
    FiniteMetricSpace,
    ball_cover,
    cover_order,
    cover_strict_order,
    disjoint_union,
    member_diameter,
    net_ball_cover,
    partition_of_unity,
    refines,
    strict_refinement,
)
from .cpmaps import (
    CPMap,
    OrderBounds,
    certify_order_zero,
    strict_order_abelian,
    strict_order_bounds,
    tensor_strict_order_exact,
    tensor_with_identity,
)
from .projections import alpha_for, orthogonalize_family

#: closed-comparison slack for strict thresholds on computed doubles
SNAP = 1e-12


class StepFailure(RuntimeError):
    """A named inequality of the extraction pipeline failed."""

    def __init__(self, step: str, message: str, data: dict | None = None):
        super().__init__(f"{step}: {message}")
        self.step = step
        self.data = data or {}


def _above(values: np.ndarray, threshold: float) -> np.ndarray:
    return values > threshold - SNAP


# ---------------------------------------------------------------------------
# function systems over a finite model
# ---------------------------------------------------------------------------

def function_algebra(space: FiniteMetricSpace, matdim: int = 1) -> FiniteDimAlgebra:
    """The block algebra of matrix-valued functions on a finite point set."""
    return FiniteDimAlgebra((matdim,) * space.npts)


def function_element(space: FiniteMetricSpace, values: np.ndarray, matdim: int = 1) -> AlgebraElement:
    vals = np.asarray(values, dtype=complex)
    alg = function_algebra(space, matdim)
    if matdim == 1:
        vals = vals.reshape(space.npts, 1, 1)
    if vals.shape != (space.npts, matdim, matdim):
        raise ValueError(f"values have shape {vals.shape}, expected ({space.npts},{matdim},{matdim})")
    return AlgebraElement(alg, list(vals))


def element_values(elem: AlgebraElement) -> np.ndarray:
    """Flatten a function-algebra element back to pointwise values."""
    m = elem.algebra.block_sizes[0]
    if m == 1:
        return np.array([b[0, 0] for b in elem.blocks])
    return np.stack(elem.blocks)


@dataclass
class FunctionSystem:
    """A finite set of scalar functions over a finite metric model."""

    space: FiniteMetricSpace
    functions: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        self.functions = [np.asarray(f, dtype=complex).reshape(-1) for f in self.functions]
        for f in self.functions:
            if f.shape != (self.space.npts,):
                raise ValueError("function length does not match the space")

    @staticmethod
    def sup_norm(f: np.ndarray) -> float:
        return float(np.abs(f).max()) if len(f) else 0.0

    @staticmethod
    def is_positive(f: np.ndarray, tol: float = 1e-12) -> bool:
        return bool(np.all(np.abs(f.imag) <= tol) and np.all(f.real >= -tol))


# ---------------------------------------------------------------------------
# the approximation triple
# ---------------------------------------------------------------------------

@dataclass
class BuildReport:
    base_cover: Cover
    base_order: int
    base_strict_order: int
    cover: Cover
    exclusive_points: list[int]
    radius: float
    oscillation_bound: float
    errors: list[float]
    phi_strict_order: int


@dataclass
class CPApproximation:
    """A triple (F, psi, phi) through a finite-dimensional algebra.

    ``psi`` maps functions on the space into F, ``phi`` maps F back to
    functions; ``weights`` is the fast evaluation path when F is abelian and
    phi is given by scalar weight functions.
    """

    space: FiniteMetricSpace
    matdim: int
    F: FiniteDimAlgebra
    psi: CPMap
    phi: CPMap
    evaluation_points: list[int] | None = None
    weights: np.ndarray | None = None
    report: BuildReport | None = None

    def compose_values(self, values: np.ndarray) -> np.ndarray:
        """Pointwise values of phi(psi(f))."""
        if self.weights is not None and self.matdim == 1 and self.evaluation_points is not None:
            f = np.asarray(values, dtype=complex).reshape(-1)
            return self.weights.T @ f[self.evaluation_points]
        elem = function_element(self.space, values, self.matdim)
        return element_values(self.phi.apply(self.psi.apply(elem)))

    def error_on(self, values: np.ndarray) -> float:
        """sup-norm error ||phi psi (f) - f||."""
        vals = np.asarray(values, dtype=complex)
        out = self.compose_values(vals)
        if self.matdim == 1:
            return float(np.abs(out - vals.reshape(-1)).max())
        diff = out - vals
        return max(float(np.linalg.norm(d, 2)) for d in diff)


def _prune_to_exclusive(members: list[frozenset[int]], labels: list[str]) -> tuple[list[frozenset[int]], list[str]]:
    """Drop duplicate members, then members without a point of their own."""
    seen: set[frozenset[int]] = set()
    mem: list[frozenset[int]] = []
    lab: list[str] = []
    for m, l in zip(members, labels):
        if m not in seen:
            seen.add(m)
            mem.append(m)
            lab.append(l)
    while True:
        counts: dict[int, int] = {}
        for m in mem:
            for p in m:
                counts[p] = counts.get(p, 0) + 1
        drop = None
        for idx, m in enumerate(mem):
            if not any(counts[p] == 1 for p in m):
                drop = idx
                break
        if drop is None:
            return mem, lab
        del mem[drop], lab[drop]


def build_cp_approx(
    space: FiniteMetricSpace,
    a_list: list[np.ndarray],
    eps: float,
    refine: bool = True,
    base_radius: float | None = None,
) -> CPApproximation:
    """Approximation through an abelian algebra: evaluations against a partition.

    Picks a ball scale at which every target oscillates by less than 2/3 of
    the tolerance, refines the net ball cover to low strict order, prunes it
    so each member owns an exclusive point, and wires up evaluations at those
    points against the subordinate partition of unity.  On a compact finite
    model the partition sums to one everywhere, so the error is bounded by
    the oscillation.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if space.npts == 0:
        raise ValueError("empty space")
    funcs = [np.asarray(f, dtype=complex).reshape(-1) for f in a_list]
    for f in funcs:
        if f.shape != (space.npts,):
            raise ValueError("function length does not match the space")

    osc_bound = (2.0 / 3.0) * eps
    if base_radius is None:
        n = space.npts
        osc = np.zeros((n, n))
        for f in funcs:
            np.maximum(osc, np.abs(f[:, None] - f[None, :]), out=osc)
        bad = osc >= osc_bound
        np.fill_diagonal(bad, False)
        if not bad.any():
            radius = space.diameter() + 1.0
        else:
            dmin = float(space.metric[bad].min())
            if dmin <= 0:
                raise ValueError("duplicate points carry conflicting values")
            radius = dmin / 2.0
    else:
        radius = base_radius

    base = net_ball_cover(space, radius)
    cover = strict_refinement(space, base) if refine else base
    members, labels = _prune_to_exclusive(list(cover.members), list(cover.labels or [str(i) for i in range(len(cover))]))
    cover = Cover(members, labels)
    if not cover.is_covering(space.npts):
        raise AssertionError("pruning lost coverage")

    counts: dict[int, int] = {}
    for m in cover.members:
        for p in m:
            counts[p] = counts.get(p, 0) + 1
    exclusive = []
    for m in cover.members:
        own = sorted(p for p in m if counts[p] == 1)
        if not own:
            raise AssertionError("pruned cover lost an exclusive point")
        exclusive.append(own[0])

    pou = partition_of_unity(space, cover)
    weights = pou.weights
    s = len(cover.members)
    F = FiniteDimAlgebra((1,) * s)
    fun_alg_unit = np.ones((1, 1, 1, 1), dtype=complex)

    psi_images = {
        (exclusive[l], l): fun_alg_unit.copy() for l in range(s)
    }
    psi = CPMap(function_algebra(space), F, psi_images)
    phi_images = {}
    for l in range(s):
        for x in np.flatnonzero(weights[l] > 0):
            phi_images[(l, int(x))] = weights[l, x] * fun_alg_unit
    phi = CPMap(F, function_algebra(space), phi_images, codomain_space=space, codomain_matdim=1)

    approx = CPApproximation(space, 1, F, psi, phi, exclusive, weights)
    errors = [approx.error_on(f) for f in funcs]
    if base_radius is None and any(e > eps for e in errors):
        raise AssertionError(f"builder exceeded its tolerance: errors {errors}")

    order = strict_order_abelian(phi)
    approx.report = BuildReport(
        base,
        cover_order(base),
        cover_strict_order(base),
        cover,
        exclusive,
        radius,
        osc_bound,
        errors,
        order,
    )
    return approx


@dataclass
class VerifyReport:
    errors: list[float]
    within: bool
    psi_cp: bool
    psi_contractive: bool
    psi_norm: float
    phi_cp: bool
    phi_contractive: bool
    phi_norm: float
    phi_order: OrderBounds


def verify_cp_approx(approx: CPApproximation, a_list: list[np.ndarray], eps: float) -> VerifyReport:
    """Errors on the given functions plus the structural verdicts for psi and phi."""
    errors = [approx.error_on(f) for f in a_list]
    psi_norm = approx.psi.apply_one().norm()
    phi_norm = approx.phi.apply_one().norm()
    return VerifyReport(
        errors,
        all(e <= eps for e in errors),
        approx.psi.is_completely_positive(),
        psi_norm <= 1.0 + 1e-9,
        psi_norm,
        approx.phi.is_completely_positive(),
        phi_norm <= 1.0 + 1e-9,
        phi_norm,
        strict_order_bounds(approx.phi),
    )


def tensor_approx(approx: CPApproximation, r: int) -> CPApproximation:
    """Approximation of matrix-valued functions by tensoring both maps with M_r.

    Strict order is unchanged: it cannot grow under tensoring, and a clique
    witness survives by fixing one minimal projection of the matrix factor.
    """
    if r < 1:
        raise ValueError("r must be >= 1")
    if not approx.F.is_abelian():
        raise ValueError("tensoring is implemented over abelian approximations")
    if r == 1:
        return approx
    psi = tensor_with_identity(approx.psi, r)
    phi = tensor_with_identity(approx.phi, r)
    F = FiniteDimAlgebra(tuple(r for _ in approx.F.block_sizes))
    return CPApproximation(
        approx.space,
        approx.matdim * r,
        F,
        psi,
        phi,
        approx.evaluation_points,
        approx.weights,
        approx.report,
    )


def direct_sum_approx(a: CPApproximation, b: CPApproximation) -> CPApproximation:
    """Combine approximations on the disjoint union of the underlying spaces."""
    if a.matdim != b.matdim:
        raise ValueError("summands must share the matrix dimension")
    space = disjoint_union(a.space, b.space)
    m = a.matdim
    na = a.space.npts
    sa = a.F.num_blocks
    F = FiniteDimAlgebra(tuple(a.F.block_sizes) + tuple(b.F.block_sizes))
    fun_alg = function_algebra(space, m)

    psi_images = {}
    for (x, l), arr in a.psi.images.items():
        psi_images[(x, l)] = arr
    for (x, l), arr in b.psi.images.items():
        psi_images[(x + na, l + sa)] = arr
    psi = CPMap(fun_alg, F, psi_images)

    phi_images = {}
    for (l, x), arr in a.phi.images.items():
        phi_images[(l, x)] = arr
    for (l, x), arr in b.phi.images.items():
        phi_images[(l + sa, x + na)] = arr
    phi = CPMap(F, fun_alg, phi_images, codomain_space=space, codomain_matdim=m)

    eval_pts = None
    if a.evaluation_points is not None and b.evaluation_points is not None:
        eval_pts = list(a.evaluation_points) + [x + na for x in b.evaluation_points]
    weights = None
    if a.weights is not None and b.weights is not None and m == 1:
        weights = np.zeros((sa + b.F.num_blocks, space.npts))
        weights[:sa, :na] = a.weights
        weights[sa:, na:] = b.weights
    return CPApproximation(space, m, F, psi, phi, eval_pts, weights)


# ---------------------------------------------------------------------------
# the cover extraction pipeline
# ---------------------------------------------------------------------------

@dataclass
class ExtractionConstants:
    n: int
    C: float
    beta: float
    alpha: float
    theta: float
    eta: float

    @classmethod
    def for_order(cls, n: int) -> "ExtractionConstants":
        C = 1.0 / (2.0 * (n + 1))
        beta = C / 2.0
        alpha = alpha_for(n + 1, beta, order=n if n >= 1 else None)
        theta = 1.0 / alpha
        eta = (1.0 - theta) * C / 2.0
        return cls(n, C, beta, alpha, theta, eta)

    def verify_identities(self) -> dict[str, float]:
        out = {
            "eta/C": self.eta / self.C,
            "1/(n+2)": 1.0 / (self.n + 2),
            "beta": self.beta,
            "1/(4(n+1))": 1.0 / (4.0 * (self.n + 1)),
        }
        if out["eta/C"] > out["1/(n+2)"] + 1e-12:
            raise AssertionError("constant identity eta/C <= 1/(n+2) failed")
        if abs(out["beta"] - out["1/(4(n+1))"]) > 1e-15:
            raise AssertionError("constant identity beta = 1/(4(n+1)) failed")
        return out


@dataclass
class ExtractionTargets:
    """The internal fine cover, its partition, and the constants for a run."""

    U: Cover
    n: int
    constants: ExtractionConstants
    level: float
    delta: float
    V: Cover
    weights: np.ndarray  # partition of unity subordinate to V
    f_weights: np.ndarray  # partition of unity subordinate to U

    def target_functions(self) -> list[np.ndarray]:
        return [self.weights[l] for l in range(self.weights.shape[0])]


def extraction_targets(space: FiniteMetricSpace, U: Cover, n: int) -> ExtractionTargets:
    """Derive the fine cover whose partition sums the approximation must track.

    The modulus of continuity of the coarse partition at level 1/|U| fixes
    delta; the fine cover keeps member diameters below delta/(3(n+1)).
    """
    if not U.is_covering(space.npts):
        raise ValueError("U does not cover the space")
    constants = ExtractionConstants.for_order(n)
    constants.verify_identities()
    fpou = partition_of_unity(space, U)
    level = 1.0 / len(U.members)
    delta = fpou.modulus_of_continuity(space, level)
    diam_bound = delta / (3.0 * (n + 1))
    radius = 0.49 * diam_bound
    V = net_ball_cover(space, radius)
    worst = max(member_diameter(space, m) for m in V.members)
    if worst >= diam_bound:
        raise AssertionError(f"fine cover diameter {worst:.6g} reached the bound {diam_bound:.6g}")
    pou = partition_of_unity(space, V)
    return ExtractionTargets(U, n, constants, level, delta, V, pou.weights, fpou.weights)


@dataclass
class NamedCheck:
    step: str
    measured: float
    bound: float
    ok: bool
    context: str = ""


@dataclass
class ExtractionReport:
    constants: ExtractionConstants
    identities: dict[str, float]
    delta: float
    checks: list[NamedCheck]
    eta_checks: list[NamedCheck]
    linearity_certificate: float
    A_sets: list[frozenset[int]]
    classes: list[list[list[int]]]
    V_tilde: dict[tuple[int, int], frozenset[int]]
    q_norms: dict[tuple[int, int], float]
    p_deviations: dict[tuple[int, int], float]
    orthogonalization_nontrivial: bool
    refinement_witness: dict[tuple[int, int], int]
    W: Cover
    W_order: int

    def check(self, step: str) -> list[NamedCheck]:
        return [c for c in self.checks if c.step == step]


def _values_of(phi: CPMap, block: int, mat: np.ndarray) -> np.ndarray:
    """Pointwise (scalar) values of phi applied to one domain block element."""
    out = phi.apply_to_block(block, mat)
    vals = np.array([b[0, 0] for b in out.blocks])
    if np.abs(vals.imag).max(initial=0.0) > 1e-9:
        raise AssertionError("expected real function values")
    return vals.real


def _diam_failure_data(
    space: FiniteMetricSpace,
    targets: ExtractionTargets,
    psi: CPMap,
    j: int,
    pts: list[int],
    delta: float,
    n: int,
) -> dict:
    """Reconstruct the separated-chain data behind a diameter violation.

    Picks points x_0..x_{n+1} pairwise at least 2 delta/(3(n+1)) apart inside
    the offending set, forms the index sets of fine members through each, and
    reports the block components of the summed partition functions together
    with the counting certificate they would violate.
    """
    sep = 2.0 * delta / (3.0 * (n + 1))
    chosen: list[int] = []
    for p in pts:
        if all(space.metric[p, c] >= sep for c in chosen):
            chosen.append(p)
        if len(chosen) == n + 2:
            break
    lam_sets = []
    for p in chosen:
        lam_sets.append([l for l, m in enumerate(targets.V.members) if p in m])
    sums = []
    for lset in lam_sets:
        h = targets.weights[lset].sum(axis=0) if lset else np.zeros(space.npts)
        elem = function_element(space, h)
        img = psi.apply(elem)
        sums.append(float(np.linalg.norm(img.blocks[j], 2)))
    return {
        "chain_points": chosen,
        "index_sets": lam_sets,
        "psi_j_norms": sums,
        "norm_floor": (n + 1) / (n + 2),
    }


def extract_cover(
    space: FiniteMetricSpace,
    U: Cover,
    n: int,
    approx: CPApproximation,
    targets: ExtractionTargets | None = None,
) -> tuple[Cover, ExtractionReport]:
    """Extract a cover of order at most n refining U from a c.p. approximation.

    The approximation must track the partition sums of the internal fine
    cover within eta (checked lazily on the index sets actually used), and
    every block of its algebra must have dichotomy order at most n.  The
    report carries the constants, the support sets, the equivalence classes,
    the projections before and after orthogonalization, and one named check
    per proof inequality; any failing inequality raises a StepFailure naming
    it.
    """
    if approx.matdim != 1:
        raise ValueError("extraction runs over scalar function systems")
    if targets is None:
        targets = extraction_targets(space, U, n)
    constants = targets.constants
    identities = constants.verify_identities()
    C, beta, alpha, theta, eta = (
        constants.C,
        constants.beta,
        constants.alpha,
        constants.theta,
        constants.eta,
    )
    phi, psi, F = approx.phi, approx.psi, approx.F
    checks: list[NamedCheck] = []
    eta_checks: list[NamedCheck] = []

    fast = approx.weights is not None and approx.evaluation_points is not None

    def phi_block_values(j: int, mat: np.ndarray) -> np.ndarray:
        if fast and F.block_sizes[j] == 1:
            return float(mat[0, 0].real) * approx.weights[j]
        return _values_of(phi, j, mat)

    def psi_block(j: int, h_vals: np.ndarray) -> np.ndarray:
        if fast and F.block_sizes[j] == 1:
            return np.array([[complex(h_vals[approx.evaluation_points[j]])]])
        return psi.apply(function_element(space, h_vals)).blocks[j]

    # strict-order admissibility, blockwise via the dichotomy
    for j, r in enumerate(F.block_sizes):
        if r == 1:
            continue
        sub = FiniteDimAlgebra((r,))
        images = {(0, c): phi.image_array(j, c) for c in range(phi.codomain.num_blocks)}
        block_map = CPMap(sub, phi.codomain, images, phi.codomain_space, phi.codomain_matdim)
        block_ok = certify_order_zero(block_map).ok or (r - 1 <= n)
        checks.append(NamedCheck("block-order", float(r - 1), float(n), block_ok, f"block {j}"))
        if not block_ok:
            raise StepFailure(
                "block-order",
                f"block {j} has size {r} > n+1 and is not order zero",
            )
    if F.is_abelian():
        order = strict_order_abelian(phi)
        checks.append(NamedCheck("ord-phi", float(order), float(n), order <= n))
        if order > n:
            raise StepFailure("ord-phi", f"strict order {order} exceeds n = {n}")

    weights = targets.weights
    nlam = weights.shape[0]
    all_indices = list(range(nlam))

    def eta_check(name: str, lam_set: list[int]) -> np.ndarray:
        h = weights[lam_set].sum(axis=0)
        composed = approx.compose_values(h)
        err = float(np.abs(composed - h).max())
        eta_checks.append(NamedCheck("eta", err, eta, err < eta, name))
        if err >= eta:
            raise StepFailure(
                "eta", f"approximation error {err:.6g} on {name} is not below eta = {eta:.6g}"
            )
        return h

    # individual-member errors feed the linearity certificate
    individual = max(
        float(np.abs(approx.compose_values(weights[l]) - weights[l]).max()) for l in range(nlam)
    )
    eta_check("full index set", all_indices)

    # support sets A_j and the equivalence classes over them
    m_blocks = F.num_blocks
    one_vals = [
        phi_block_values(j, np.eye(F.block_sizes[j], dtype=complex)) for j in range(m_blocks)
    ]
    A_sets = [frozenset(np.flatnonzero(_above(v, C)).tolist()) for v in one_vals]
    pt_members: list[list[int]] = [[] for _ in range(space.npts)]
    for l, mem in enumerate(targets.V.members):
        for p in mem:
            pt_members[p].append(l)
    classes: list[list[list[int]]] = []
    for j in range(m_blocks):
        # members sharing a point of A_j are equivalent; chain through points
        parent: dict[int, int] = {}

        def find(x: int) -> int:
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for x in A_sets[j]:
            ms = pt_members[x]
            for l in ms:
                parent.setdefault(l, l)
            for l in ms[1:]:
                ra, rb = find(ms[0]), find(l)
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)
        groups: dict[int, list[int]] = {}
        for l in parent:
            groups.setdefault(find(l), []).append(l)
        classes.append([sorted(g) for _, g in sorted(groups.items())])

    V_tilde: dict[tuple[int, int], frozenset[int]] = {}
    q_mats: dict[tuple[int, int], np.ndarray] = {}
    q_norms: dict[tuple[int, int], float] = {}
    for j in range(m_blocks):
        A = A_sets[j]
        for i, cls in enumerate(classes[j]):
            vt: set[int] = set()
            for l in cls:
                vt |= targets.V.members[l] & A
            V_tilde[(j, i)] = frozenset(vt)
            h = eta_check(f"class ({j},{i})", cls)
            blk = psi_block(j, h)
            w, vecs = eigh_canonical((blk + blk.conj().T) / 2)
            proj = (vecs * _above(w, theta).astype(float)) @ vecs.conj().T
            q_mats[(j, i)] = proj
            q_norms[(j, i)] = float(np.linalg.norm(blk, 2))

            # named inequality (1): phi(1_j - q)(x) < C/2 on the class support
            rest = np.eye(F.block_sizes[j], dtype=complex) - proj
            vals = phi_block_values(j, rest)
            sup = max((vals[x] for x in vt), default=0.0)
            checks.append(NamedCheck("(1)", float(sup), C / 2.0, sup < C / 2.0, f"({j},{i})"))
            if sup >= C / 2.0:
                raise StepFailure(
                    "(1)",
                    f"phi(1_{j} - q_{j}^{({i})}) reaches {sup:.6g} >= C/2 on its class support",
                )

    worst_lam = max((len(cls) for j in range(m_blocks) for cls in classes[j]), default=1)
    linearity = individual * max(worst_lam, nlam)

    # orthogonalize the q's blockwise
    p_mats: dict[tuple[int, int], np.ndarray] = {}
    p_devs: dict[tuple[int, int], float] = {}
    nontrivial = False
    for j in range(m_blocks):
        idxs = [i for i in range(len(classes[j])) if np.abs(q_mats[(j, i)]).max() > 1e-12]
        count_ok = len(idxs) <= n + 1
        checks.append(
            NamedCheck("class-count", float(len(idxs)), float(n + 1), count_ok, f"block {j}")
        )
        if not count_ok:
            raise StepFailure(
                "class-count", f"block {j} carries {len(idxs)} classes > n+1 = {n + 1}"
            )
        if not idxs:
            continue
        r = F.block_sizes[j]
        sub = FiniteDimAlgebra((r,))
        qs = [AlgebraElement(sub, [q_mats[(j, i)]]) for i in idxs]
        total = qs[0]
        for q in qs[1:]:
            total = total + q
        sup_norm = total.norm()
        checks.append(NamedCheck("sum-alpha", sup_norm, alpha, sup_norm <= alpha + SNAP, f"block {j}"))
        if sup_norm > alpha + SNAP:
            raise StepFailure(
                "sum-alpha", f"||sum_i q_{j}^(i)|| = {sup_norm:.8g} exceeds alpha = {alpha:.8g}"
            )
        fam = orthogonalize_family(qs, alpha)
        nontrivial = nontrivial or not fam.unchanged
        for pos, i in enumerate(idxs):
            p = fam.projections[pos].blocks[0]
            p_mats[(j, i)] = p
            dev = float(np.linalg.norm(p - q_mats[(j, i)], 2))
            p_devs[(j, i)] = dev
            checks.append(NamedCheck("beta", dev, beta, dev <= beta + 1e-9, f"({j},{i})"))
            if dev > beta + 1e-9:
                raise StepFailure("beta", f"||p - q|| = {dev:.6g} exceeds beta = {beta:.6g}")

    # the covering members W and the remaining named inequalities
    members: list[frozenset[int]] = []
    labels: list[str] = []
    keys: list[tuple[int, int]] = []
    p_vals: dict[tuple[int, int], np.ndarray] = {}
    for (j, i), p in p_mats.items():
        vals = phi_block_values(j, p)
        p_vals[(j, i)] = vals
        w_set = frozenset(np.flatnonzero(_above(vals, C)).tolist())
        rest = np.eye(F.block_sizes[j], dtype=complex) - p
        rest_vals = phi_block_values(j, rest)
        vt = V_tilde[(j, i)]
        sup = max((rest_vals[x] for x in vt), default=0.0)
        checks.append(NamedCheck("(*)", float(sup), C, sup < C, f"({j},{i})"))
        if sup >= C:
            raise StepFailure("(*)", f"phi(1_{j} - p_{j}^{({i})}) reaches {sup:.6g} >= C")
        inside = w_set <= vt
        checks.append(
            NamedCheck("W-inside-V", float(len(w_set - vt)), 0.0, inside, f"({j},{i})")
        )
        if not inside:
            raise StepFailure(
                "W-inside-V", f"W_{j}^{({i})} leaves its class support at {sorted(w_set - vt)[:4]}"
            )
        diam = member_diameter(space, vt)
        checks.append(NamedCheck("diam", diam, targets.delta, diam < targets.delta, f"({j},{i})"))
        if diam >= targets.delta:
            pts = sorted(vt)
            data = _diam_failure_data(space, targets, psi, j, pts, targets.delta, n)
            raise StepFailure(
                "diam",
                f"diam of the class support ({j},{i}) is {diam:.6g} >= delta = {targets.delta:.6g}",
                data,
            )
        if w_set:
            members.append(w_set)
            labels.append(f"W[{j},{i}]")
            keys.append((j, i))

    W = Cover(members, labels)
    covered: set[int] = set()
    for m in W.members:
        covered |= m
    missing = set(range(space.npts)) - covered
    checks.append(NamedCheck("covering", float(len(missing)), 0.0, not missing))
    if missing:
        raise StepFailure("covering", f"points {sorted(missing)[:6]} lie in no W member")

    order_W = cover_order(W)
    checks.append(NamedCheck("order", float(order_W), float(n), order_W <= n))
    if order_W > n:
        raise StepFailure("order", f"cover order {order_W} exceeds n = {n}")

    witness: dict[tuple[int, int], int] = {}
    for key, m in zip(keys, W.members):
        vt = V_tilde[key]
        target = None
        for g, big in enumerate(U.members):
            if vt <= big:
                target = g
                break
        checks.append(
            NamedCheck("refines", 0.0 if target is not None else 1.0, 0.0, target is not None, str(key))
        )
        if target is None:
            raise StepFailure("refines", f"class support {key} fits in no member of U")
        witness[key] = target
    ok, _ = refines(W, U)
    if not ok:
        raise StepFailure("refines", "W does not refine U")

    report = ExtractionReport(
        constants,
        identities,
        targets.delta,
        checks,
        eta_checks,
        linearity,
        A_sets,
        classes,
        V_tilde,
        q_norms,
        p_devs,
        nontrivial,
        witness,
        W,
        order_W,
    )
    return W, report


# ---------------------------------------------------------------------------
# scale-probed estimates for commutative systems
# ---------------------------------------------------------------------------

@dataclass
class ScaleEvidence:
    scale: float
    net_size: int
    base_order: int
    refined_strict_order: int
    builder_order: int | None
    builder_errors: list[float] | None


def estimate_cpr_commutative(
    space: FiniteMetricSpace,
    scales: list[float],
    probes: list[np.ndarray] | None = None,
) -> tuple[int, list[ScaleEvidence]]:
    """Strict order achievable by refined net covers at each probed scale.

    For every scale, the net ball cover is refined and its exact strict order
    recorded; the reported value is the largest of these, an upper bound for
    the strict order achievable at every probed scale.  Builder strict orders
    at matching scales are reported as a cross-check.  The value says nothing
    about other scales; finite models are zero-dimensional in the limit.
    """
    if not scales or any(s <= 0 for s in scales):
        raise ValueError("scales must be positive")
    evidence = []
    values = []
    for scale in scales:
        base = net_ball_cover(space, scale)
        refined = strict_refinement(space, base)
        so = cover_strict_order(refined)
        builder_order = None
        builder_errors = None
        if probes:
            approx = build_cp_approx(space, probes, eps=1.0, base_radius=scale)
            builder_order = approx.report.phi_strict_order
            builder_errors = approx.report.errors
        evidence.append(
            ScaleEvidence(scale, len(base.members), cover_order(base), so, builder_order, builder_errors)
        )
        values.append(so)
    return max(values), evidence
