"""Best subspace approximation of a 3-tensor by alternating relaxation.

Given target ranks ``(p, q, r)``, the solver looks for subspaces
``X, Y, Z`` of the three mode spaces such that the orthogonal projection
of the tensor onto ``X (x) Y (x) Z`` is as large as possible --
equivalently, the distance from the tensor to the product is minimal.

One sweep updates the modes in turn.  With two frames held fixed the
problem in the remaining mode is linear: the optimal subspace is spanned
by the dominant left singular vectors of a projected operator, so each
update is a thin SVD and the objective can never decrease.  Converged
points are certified by an invariant-subspace residual: at a critical
point each frame spans an invariant subspace of its projected Gram
matrix.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .subspace import Subspace, SubspaceTriple, coefficient_tensor, project
from .tensor_core import (
    DenseTensor3,
    _check_mode,
    as_matrix,
    hs_norm,
    numerical_rank,
    unfold,
)

DEFAULT_MAX_SWEEPS = 200
DEFAULT_REL_TOL = 1e-10
DEFAULT_CRIT_TOL = 1e-6

_TINY = float(np.finfo(np.float64).tiny)

#: Relative spread below which neighbouring singular values are treated
#: as tied when extracting a dominant frame.
_TIE_RTOL = 1e-12


@dataclass(frozen=True)
class BstaOptions:
    """Knobs for :func:`bsta_solve`.

    Parameters
    ----------
    target_ranks : (p, q, r)
        Dimensions of the mode-1, mode-2 and mode-3 subspaces.
    max_sweeps : int
        Upper bound on full relaxation sweeps.
    rel_tol : float
        Stop once the objective gain of a full sweep drops below
        ``rel_tol`` times the squared norm of the input tensor.
    init : str
        ``"hosvd"`` (dominant singular frames of the unfoldings) or
        ``"random"`` (seeded random orthonormal frames).
    seed : int
        Seed for the random initialization.
    crit_tol : float
        Threshold for the critical-point certificate.
    """

    target_ranks: tuple[int, int, int]
    max_sweeps: int = DEFAULT_MAX_SWEEPS
    rel_tol: float = DEFAULT_REL_TOL
    init: str = "hosvd"
    seed: int = 0
    crit_tol: float = DEFAULT_CRIT_TOL

    def __post_init__(self) -> None:
        ranks = tuple(int(k) for k in self.target_ranks)
        if len(ranks) != 3 or min(ranks) < 1:
            raise ValueError(f"target_ranks must be three positive ints, got {self.target_ranks}")
        object.__setattr__(self, "target_ranks", ranks)
        if int(self.max_sweeps) < 1:
            raise ValueError(f"max_sweeps must be >= 1, got {self.max_sweeps}")
        object.__setattr__(self, "max_sweeps", int(self.max_sweeps))
        if not (self.rel_tol > 0.0):
            raise ValueError(f"rel_tol must be positive, got {self.rel_tol}")
        if not (self.crit_tol > 0.0):
            raise ValueError(f"crit_tol must be positive, got {self.crit_tol}")
        if self.init not in ("hosvd", "random"):
            raise ValueError(f"init must be 'hosvd' or 'random', got {self.init!r}")


@dataclass
class BstaResult:
    """Outcome of :func:`bsta_solve`.

    ``objective_history`` records the squared projection norm after every
    mode update (three entries per sweep) and is non-decreasing.
    ``approx_error`` is the distance from the input to the final product
    subspace, so ``approx_error**2 + objective_history[-1]`` equals the
    squared norm of the input.  ``converged`` means the sweep loop
    stagnated *and* the critical-point certificate passed.
    """

    subspaces: SubspaceTriple
    core: DenseTensor3
    objective_history: list[float] = field(repr=False)
    approx_error: float
    sweeps: int
    converged: bool
    critical_point_residual: float


def projected_operator(t: DenseTensor3, mode: int, a: Subspace, b: Subspace) -> np.ndarray:
    """Unfolding of ``t`` after compressing the two other modes.

    ``a`` lives in the lower and ``b`` in the higher of the two remaining
    modes.  Entry ``(i, (col_a, col_b))`` of the result is the inner
    product of ``t`` with ``e_i`` in mode ``mode`` and the frames'
    columns in the other modes; columns are ordered lexicographically
    with the higher mode fastest, matching :func:`~.tensor_core.unfold`.
    """
    ax = _check_mode(mode)
    rest = [k for k in range(3) if k != ax]
    expected = (t.dims[rest[0]], t.dims[rest[1]])
    got = (a.ambient_dim, b.ambient_dim)
    if got != expected:
        raise ValueError(
            f"ambient dims {got} do not match the non-mode-{mode} tensor dims {expected}"
        )
    eq = {1: "ijk,jb,kc->ibc", 2: "ijk,ia,kc->jac", 3: "ijk,ia,jb->kab"}[mode]
    out = np.einsum(eq, t.data, a.frame, b.frame, optimize=True)
    return out.reshape(t.dims[ax], -1)


def _complete_frame(frame: np.ndarray, k: int) -> np.ndarray:
    """Pad an orthonormal frame to ``k`` columns with standard basis directions.

    Basis vectors are tried in index order and orthogonalized against the
    columns collected so far, so the result is deterministic.
    """
    m = frame.shape[0]
    if k > m:
        raise ValueError(f"cannot build {k} orthonormal columns in dimension {m}")
    cols = frame
    for i in range(m):
        if cols.shape[1] == k:
            break
        v = np.zeros(m)
        v[i] = 1.0
        r = v - cols @ (cols.T @ v)
        r = r - cols @ (cols.T @ r)
        nrm = float(np.linalg.norm(r))
        if nrm > 1e-8:
            cols = np.hstack([cols, (r / nrm)[:, None]])
    if cols.shape[1] < k:
        raise np.linalg.LinAlgError("frame completion failed to reach the requested dimension")
    return cols


def _dominant_left_frame(m: np.ndarray, k: int, prev: np.ndarray | None = None) -> np.ndarray:
    """Orthonormal frame for a dominant ``k``-dimensional left subspace of ``m``.

    Returns the top ``k`` left singular vectors.  If the matrix has fewer
    than ``k`` singular triplets the frame is completed with standard
    basis directions.  When ``prev`` is given and the singular spectrum
    is (numerically) tied across the ``k`` boundary, the tied directions
    are rotated to maximize overlap with ``prev`` -- the choice of
    dominant subspace is ambiguous there, and preferring the previous
    frame keeps fixed points fixed.
    """
    u, s, _ = np.linalg.svd(m, full_matrices=False)
    avail = u.shape[1]
    if k >= avail:
        return u if k == avail else _complete_frame(u, k)
    plain = u[:, :k]
    if prev is None:
        return plain
    tie_tol = _TIE_RTOL * s[0]
    in_group = np.abs(s - s[k - 1]) <= tie_tol
    lo = int(np.argmax(in_group))
    hi = len(s) - 1 - int(np.argmax(in_group[::-1]))
    if hi < k:
        return plain
    fixed = u[:, :lo]
    w = u[:, lo : hi + 1]
    need = k - lo
    _, _, vh = np.linalg.svd(prev.T @ w, full_matrices=False)
    rotated = np.hstack([fixed, w @ vh[:need].T])
    # A near-tie (not an exact one) can trade a sliver of objective for
    # continuity; never trade more than roundoff.
    f_plain = float(np.sum(s[:k] ** 2))
    f_rot = float(np.linalg.norm(rotated.T @ m) ** 2)
    if f_rot >= f_plain - 1e-13 * max(f_plain, 1.0):
        return rotated
    return plain


def random_triple(
    dims: tuple[int, int, int], ranks: tuple[int, int, int], seed=0
) -> SubspaceTriple:
    """Seeded random subspace triple (orthonormalized Gaussian frames)."""
    rng = np.random.default_rng(seed)
    frames = []
    for m, k in zip(dims, ranks):
        if not 1 <= k <= m:
            raise ValueError(f"rank {k} out of range for dimension {m}")
        q, _ = np.linalg.qr(rng.standard_normal((m, k)))
        frames.append(Subspace(q))
    return SubspaceTriple(*frames)


def hosvd_init(t: DenseTensor3, ranks: tuple[int, int, int]) -> SubspaceTriple:
    """Initial triple from the dominant left singular frames of the unfoldings."""
    _check_ranks(t.dims, ranks)
    frames = [
        Subspace(_dominant_left_frame(unfold(t, mode), ranks[mode - 1]))
        for mode in (1, 2, 3)
    ]
    return SubspaceTriple(*frames)


def _check_ranks(dims: tuple[int, int, int], ranks) -> tuple[int, int, int]:
    ranks = tuple(int(k) for k in ranks)
    if len(ranks) != 3:
        raise ValueError(f"expected three target ranks, got {ranks}")
    for k, m in zip(ranks, dims):
        if not 1 <= k <= m:
            raise ValueError(f"target ranks {ranks} out of range for dims {dims}")
    return ranks


def relaxation_sweep(
    t: DenseTensor3, s: SubspaceTriple
) -> tuple[SubspaceTriple, tuple[float, float, float]]:
    """One alternating sweep over the three modes.

    Each mode update replaces that subspace with a dominant left subspace
    of the corresponding projected operator (the other two frames held at
    their current values).  Returns the updated triple and the squared
    projection norm after each of the three updates; the sequence extends
    the objective history monotonically.
    """
    if s.ambient_dims != t.dims:
        raise ValueError(
            f"subspace ambient dims {s.ambient_dims} do not match tensor dims {t.dims}"
        )
    x, y, z = s.x, s.y, s.z

    m1 = projected_operator(t, 1, y, z)
    x = Subspace(_dominant_left_frame(m1, x.dim, prev=x.frame))
    f1 = float(np.linalg.norm(x.frame.T @ m1) ** 2)

    m2 = projected_operator(t, 2, x, z)
    y = Subspace(_dominant_left_frame(m2, y.dim, prev=y.frame))
    f2 = float(np.linalg.norm(y.frame.T @ m2) ** 2)

    m3 = projected_operator(t, 3, x, y)
    z = Subspace(_dominant_left_frame(m3, z.dim, prev=z.frame))
    f3 = float(np.linalg.norm(z.frame.T @ m3) ** 2)

    return SubspaceTriple(x, y, z), (f1, f2, f3)


def verify_critical_point(
    t: DenseTensor3, s: SubspaceTriple, tol: float = DEFAULT_CRIT_TOL
) -> tuple[float, bool]:
    """Invariant-subspace certificate for a candidate solution.

    At a critical point each frame ``F`` spans an invariant subspace of
    ``G = M @ M.T``, where ``M`` is the projected operator of its mode.
    The residual for one mode is ``|G F - F (F^T G F)|_F / max(|G|_F, tiny)``;
    the returned residual is the worst over the three modes, together
    with the verdict ``residual <= tol``.
    """
    if s.ambient_dims != t.dims:
        raise ValueError(
            f"subspace ambient dims {s.ambient_dims} do not match tensor dims {t.dims}"
        )
    pairs = {1: (s.y, s.z), 2: (s.x, s.z), 3: (s.x, s.y)}
    frames = {1: s.x, 2: s.y, 3: s.z}
    worst = 0.0
    for mode in (1, 2, 3):
        m = projected_operator(t, mode, *pairs[mode])
        g = m @ m.T
        f = frames[mode].frame
        gf = g @ f
        resid = gf - f @ (f.T @ gf)
        rel = float(np.linalg.norm(resid) / max(np.linalg.norm(g), _TINY))
        worst = max(worst, rel)
    return worst, worst <= tol


def bsta_solve(t: DenseTensor3, opts: BstaOptions) -> BstaResult:
    """Alternating relaxation for the best subspace approximation.

    Sweeps :func:`relaxation_sweep` from an HOSVD or seeded random start
    until the objective gain of a full sweep falls below
    ``rel_tol * |t|^2`` or ``max_sweeps`` is exhausted, then certifies
    the final triple with :func:`verify_critical_point`.
    """
    ranks = _check_ranks(t.dims, opts.target_ranks)
    if opts.init == "hosvd":
        s = hosvd_init(t, ranks)
    else:
        s = random_triple(t.dims, ranks, opts.seed)

    norm_sq = hs_norm(t) ** 2
    gain_floor = opts.rel_tol * max(norm_sq, _TINY)
    obj = hs_norm(coefficient_tensor(t, s)) ** 2

    history: list[float] = []
    sweeps = 0
    stagnated = False
    for _ in range(opts.max_sweeps):
        s, fs = relaxation_sweep(t, s)
        sweeps += 1
        history.extend(fs)
        gain = fs[2] - obj
        obj = fs[2]
        if gain < gain_floor:
            stagnated = True
            break

    residual, certified = verify_critical_point(t, s, opts.crit_tol)
    core = coefficient_tensor(t, s)
    # The direct residual norm agrees with sqrt(|t|^2 - objective) by
    # Pythagoras but avoids the sqrt(eps) cancellation floor of the
    # subtraction when the approximation is (near-)exact.
    approx_error = float(np.linalg.norm(t.data - project(t, s).data))
    return BstaResult(
        subspaces=s,
        core=core,
        objective_history=history,
        approx_error=approx_error,
        sweeps=sweeps,
        converged=stagnated and certified,
        critical_point_residual=residual,
    )


def matrix_bsta(a, k: int) -> tuple[Subspace, Subspace, float]:
    """Best rank-``k`` subspace pair for a matrix.

    Returns the dominant left and right singular subspaces and the
    approximation error ``sqrt(sum of discarded squared singular values)``.
    """
    arr = as_matrix(a)
    if not 1 <= k <= min(arr.shape):
        raise ValueError(f"k={k} out of range for shape {arr.shape}")
    u, s, vh = np.linalg.svd(arr, full_matrices=False)
    left = Subspace(u[:, :k])
    right = Subspace(vh[:k].T)
    error = float(np.sqrt(np.sum(s[k:] ** 2)))
    return left, right, error


def matrix_bsta_fixed_factor(a, y: Subspace, i: int) -> Subspace:
    """Best ``i``-dimensional row-space partner for a fixed column subspace.

    With ``Y`` fixed, the optimal ``X`` is spanned by the dominant left
    singular vectors of ``A @ Y_frame``.  If that matrix has numerical
    rank at most ``i`` the solution is not unique: any ``i``-dimensional
    subspace containing its range works, and the returned frame pads the
    range with standard basis directions.
    """
    arr = as_matrix(a)
    if y.ambient_dim != arr.shape[1]:
        raise ValueError(
            f"subspace ambient dim {y.ambient_dim} does not match matrix columns {arr.shape[1]}"
        )
    if not 1 <= i <= arr.shape[0]:
        raise ValueError(f"i={i} out of range for {arr.shape[0]} rows")
    b = arr @ y.frame
    u, _, _ = np.linalg.svd(b, full_matrices=False)
    rank = numerical_rank(b)
    if rank >= i:
        return Subspace(u[:, :i])
    return Subspace(_complete_frame(u[:, :rank], i))
