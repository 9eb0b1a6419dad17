"""Fiber-sampling low-rank approximation of dense 3-tensors.

Instead of optimizing subspaces, this route reads only a few sections of
the tensor: index sets ``I``, ``J``, ``K`` select rows, columns and
slices, and the tensor is interpolated from the three cross sections it
induces, a third-order analogue of matrix skeleton (CUR) approximation.
Each mode-3 slice is replaced by its cross approximation through the
``(I, J)`` block, and the slices themselves are interpolated through the
``K`` columns of the doubly-indexed unfolding.  The result assembles
into an explicit Tucker factorization whose storage is governed by the
section sizes rather than the full tensor.

Index sets are 0-based throughout, like all Python indexing.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .tensor_core import DenseTensor3, as_matrix, numerical_rank

_EPS = float(np.finfo(np.float64).eps)

DEFAULT_TRIALS = 20

#: Warn when the best selection found still has a condition number above this.
COND_WARN_THRESHOLD = 1e8


class RankDeficientDesignWarning(RuntimeWarning):
    """The sampled least-squares system was singular; a minimum-norm core was returned."""


class SelectionError(RuntimeError):
    """Every sampling trial produced singular cross matrices.

    Carries the best-effort ``selection`` (with its full ``cond_report``)
    so callers can still proceed, eyes open, on degenerate inputs.
    """

    def __init__(self, message: str, selection: "IndexSelection") -> None:
        super().__init__(message)
        self.selection = selection
        self.report = selection.cond_report


@dataclass(frozen=True)
class TrialConditions:
    """Condition numbers of one sampling trial (+inf marks a singular matrix)."""

    i_set: tuple[int, ...]
    j_set: tuple[int, ...]
    k_set: tuple[int, ...]
    cond_outer: float
    cond_slices: tuple[float, ...]

    @property
    def worst(self) -> float:
        return max(self.cond_outer, max(self.cond_slices))


def _check_index_set(values, bound: int, name: str) -> tuple[int, ...]:
    out = tuple(int(v) for v in values)
    if len(out) == 0:
        raise ValueError(f"{name} must not be empty")
    if len(set(out)) != len(out):
        raise ValueError(f"{name} contains duplicate indices: {out}")
    for v in out:
        if not 0 <= v < bound:
            raise ValueError(f"{name} index {v} out of range [0, {bound})")
    return tuple(sorted(out))


@dataclass(frozen=True)
class IndexSelection:
    """Sampling pattern: index sets for the three modes of a fixed-size tensor.

    ``l_set`` is derived once at construction: the positions of the
    ``I x J`` grid inside the row space of the mode-3-major unfolding
    (row ``i * dims[1] + j``), in lexicographic order.
    """

    dims: tuple[int, int, int]
    i_set: tuple[int, ...]
    j_set: tuple[int, ...]
    k_set: tuple[int, ...]
    cond_report: tuple[TrialConditions, ...] | None = None
    l_set: tuple[int, ...] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        dims = tuple(int(d) for d in self.dims)
        if len(dims) != 3 or min(dims) < 1:
            raise ValueError(f"dims must be three positive ints, got {self.dims}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "i_set", _check_index_set(self.i_set, dims[0], "i_set"))
        object.__setattr__(self, "j_set", _check_index_set(self.j_set, dims[1], "j_set"))
        object.__setattr__(self, "k_set", _check_index_set(self.k_set, dims[2], "k_set"))
        l_set = tuple(i * dims[1] + j for i in self.i_set for j in self.j_set)
        object.__setattr__(self, "l_set", l_set)

    @property
    def sizes(self) -> tuple[int, int, int]:
        return (len(self.i_set), len(self.j_set), len(self.k_set))

    @property
    def chosen_conditions(self) -> TrialConditions | None:
        """The trial record matching this selection, if a report is attached."""
        if self.cond_report is None:
            return None
        for rec in self.cond_report:
            if (rec.i_set, rec.j_set, rec.k_set) == (self.i_set, self.j_set, self.k_set):
                return rec
        return None


@dataclass(frozen=True, eq=False)
class TuckerFactorization:
    """Core tensor plus one factor matrix per mode.

    Factor ``j`` has shape ``(core_dim_j, out_dim_j)``: it maps the
    core's mode-``j`` coordinates onto the reconstructed tensor's, so
    ``reconstruct()`` contracts each core axis with its factor's rows.
    """

    core: DenseTensor3
    factors: tuple[np.ndarray, np.ndarray, np.ndarray]

    def __post_init__(self) -> None:
        if len(self.factors) != 3:
            raise ValueError(f"expected three factors, got {len(self.factors)}")
        facs = tuple(as_matrix(f, f"factor {j + 1}") for j, f in enumerate(self.factors))
        for j, f in enumerate(facs):
            if f.shape[0] != self.core.dims[j]:
                raise ValueError(
                    f"factor {j + 1} rows ({f.shape[0]}) do not match core "
                    f"dimension ({self.core.dims[j]})"
                )
        object.__setattr__(self, "factors", facs)

    @property
    def dims(self) -> tuple[int, int, int]:
        """Dimensions of the reconstructed tensor."""
        return tuple(f.shape[1] for f in self.factors)  # type: ignore[return-value]

    def reconstruct(self) -> DenseTensor3:
        """Contract the core with all three factors."""
        f1, f2, f3 = self.factors
        out = np.einsum("abc,ai,bj,ck->ijk", self.core.data, f1, f2, f3, optimize=True)
        return DenseTensor3(out)

    def storage_count(self) -> int:
        """Number of stored scalars (core plus factors)."""
        return self.core.size + sum(f.size for f in self.factors)


def pinv(m, tol: float | None = None) -> np.ndarray:
    """Moore-Penrose pseudoinverse via SVD.

    Singular values at or below ``tol * sigma_max`` are treated as zero;
    the default ``tol`` is ``max(rows, cols) * machine_eps``.
    """
    arr = as_matrix(m)
    u, s, vh = np.linalg.svd(arr, full_matrices=False)
    if tol is None:
        tol = max(arr.shape) * _EPS
    inv = np.zeros_like(s)
    if s.size and s[0] > 0.0:
        keep = s > tol * s[0]
        inv[keep] = 1.0 / s[keep]
    return (vh.T * inv) @ u.T


def sections(
    t: DenseTensor3, sel: IndexSelection
) -> tuple[DenseTensor3, DenseTensor3, DenseTensor3]:
    """The three cross sections induced by a selection.

    The first section keeps all of mode 1 and restricts modes 2, 3 to
    ``(j_set, k_set)``; the other two analogously keep modes 2 and 3.
    """
    if sel.dims != t.dims:
        raise ValueError(f"selection dims {sel.dims} do not match tensor dims {t.dims}")
    a = t.data
    l1, l2, l3 = t.dims
    c1 = a[np.ix_(np.arange(l1), sel.j_set, sel.k_set)]
    c2 = a[np.ix_(sel.i_set, np.arange(l2), sel.k_set)]
    c3 = a[np.ix_(sel.i_set, sel.j_set, np.arange(l3))]
    return DenseTensor3(c1), DenseTensor3(c2), DenseTensor3(c3)


def slice_cross(t: DenseTensor3, sel: IndexSelection, k: int, pinv_tol: float | None = None) -> np.ndarray:
    """Skeleton (CUR) approximation of the mode-3 slice at index ``k``.

    Returns ``F[:, J] @ pinv(F[I, J]) @ F[I, :]`` for the slice
    ``F = t[:, :, k]``; exact whenever ``rank(F[I, J]) == rank(F)``.
    """
    if sel.dims != t.dims:
        raise ValueError(f"selection dims {sel.dims} do not match tensor dims {t.dims}")
    if k not in sel.k_set:
        raise ValueError(f"slice index {k} is not in k_set {sel.k_set}")
    f = t.data[:, :, k]
    block = f[np.ix_(sel.i_set, sel.j_set)]
    return f[:, sel.j_set] @ pinv(block, pinv_tol) @ f[sel.i_set, :]


def flrta_approx(t: DenseTensor3, sel: IndexSelection, pinv_tol: float | None = None) -> TuckerFactorization:
    """Assemble the cross approximation of ``t`` as an explicit Tucker form.

    The mode-3 slices over ``k_set``, each replaced by its skeleton
    approximation through the ``(I, J)`` block, are interpolated across
    mode 3 through the ``(L, K)`` block of the mode-3-major unfolding
    (``L`` is the image of ``I x J``).  Expanding both interpolations
    gives a Tucker form whose factors are exactly the three sections --
    only entries of ``t`` on the sections appear in the factors, and the
    core is built from pseudoinverses of the small cross blocks.
    """
    if sel.dims != t.dims:
        raise ValueError(f"selection dims {sel.dims} do not match tensor dims {t.dims}")
    a = t.data
    l1, l2, l3 = t.dims
    p, q, r = sel.sizes

    # Sections, reshaped as factor matrices (rows pack the two sampled
    # indices lexicographically; columns run over the free mode).
    c1 = a[np.ix_(np.arange(l1), sel.j_set, sel.k_set)].transpose(1, 2, 0).reshape(q * r, l1)
    c2 = a[np.ix_(sel.i_set, np.arange(l2), sel.k_set)].transpose(0, 2, 1).reshape(p * r, l2)
    c3 = a[np.ix_(sel.i_set, sel.j_set, np.arange(l3))].reshape(p * q, l3)

    # Interpolation weights across mode 3 ...
    w = pinv(a.reshape(l1 * l2, l3)[np.ix_(sel.l_set, sel.k_set)], pinv_tol)  # (r, p*q)
    # ... and within each selected slice.
    core = np.zeros((q * r, p * r, p * q))
    row_base = np.arange(q) * r
    col_base = np.arange(p) * r
    cross_slab = a[np.ix_(sel.i_set, sel.j_set)]  # (p, q, l3)
    for kidx, k in enumerate(sel.k_set):
        pk = pinv(cross_slab[:, :, k], pinv_tol)  # (q, p)
        core[np.ix_(row_base + kidx, col_base + kidx)] = pk[:, :, None] * w[kidx][None, None, :]
    return TuckerFactorization(DenseTensor3(core), (c1, c2, c3))


def _condition_number(m: np.ndarray) -> float:
    """sigma_max / sigma_min, or +inf when the matrix is numerically singular."""
    s = np.linalg.svd(m, compute_uv=False)
    if s.size == 0 or s[0] <= 0.0:
        return float("inf")
    if s[-1] <= max(m.shape) * _EPS * s[0]:
        return float("inf")
    return float(s[0] / s[-1])


def select_indices(
    t: DenseTensor3,
    ranks: tuple[int, int, int],
    trials: int = DEFAULT_TRIALS,
    seed: int = 0,
) -> IndexSelection:
    """Pick index sets of the given sizes by seeded random search.

    Draws ``trials`` uniform without-replacement triples of index sets,
    scores each by the worst condition number over its cross matrices
    (the ``(L, K)`` interpolation block and the per-slice ``(I, J)``
    blocks), and returns the selection with the smallest score.  Ties
    break to the lexicographically smallest sets, so the outcome is a
    deterministic function of the tensor, sizes, trials and seed.

    Raises :class:`SelectionError` when every trial is singular; the
    error carries the best-effort selection and the full report.
    """
    l1, l2, l3 = t.dims
    p, q, r = (int(k) for k in ranks)
    for size, bound, name in ((p, l1, "p"), (q, l2, "q"), (r, l3, "r")):
        if not 1 <= size <= bound:
            raise ValueError(f"section size {name}={size} out of range [1, {bound}]")
    trials = int(trials)
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")

    rng = np.random.default_rng(seed)
    cands = []
    for _ in range(trials):
        ii = tuple(sorted(rng.choice(l1, size=p, replace=False).tolist()))
        jj = tuple(sorted(rng.choice(l2, size=q, replace=False).tolist()))
        kk = tuple(sorted(rng.choice(l3, size=r, replace=False).tolist()))
        cands.append((ii, jj, kk))

    unfolded = t.data.reshape(l1 * l2, l3)
    records = []
    for ii, jj, kk in cands:
        l_set = [i * l2 + j for i in ii for j in jj]
        cond_outer = _condition_number(unfolded[np.ix_(l_set, kk)])
        cond_slices = tuple(
            _condition_number(t.data[np.ix_(ii, jj, [k])][:, :, 0]) for k in kk
        )
        records.append(TrialConditions(ii, jj, kk, cond_outer, cond_slices))

    best = min(records, key=lambda rec: (rec.worst, rec.i_set, rec.j_set, rec.k_set))
    selection = IndexSelection(
        t.dims, best.i_set, best.j_set, best.k_set, cond_report=tuple(records)
    )
    if not np.isfinite(best.worst):
        raise SelectionError(
            f"all {trials} sampling trials produced singular cross matrices "
            f"for section sizes ({p}, {q}, {r})",
            selection,
        )
    if best.worst > COND_WARN_THRESHOLD:
        warnings.warn(
            f"best selection is poorly conditioned (worst condition number "
            f"{best.worst:.3e})",
            RuntimeWarning,
            stacklevel=2,
        )
    return selection


def _check_factors(t: DenseTensor3, factors) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if len(factors) != 3:
        raise ValueError(f"expected three factors, got {len(factors)}")
    facs = tuple(as_matrix(f, f"factor {j + 1}") for j, f in enumerate(factors))
    for j, f in enumerate(facs):
        if f.shape[1] != t.dims[j]:
            raise ValueError(
                f"factor {j + 1} columns ({f.shape[1]}) do not match tensor "
                f"dimension ({t.dims[j]})"
            )
    return facs


def fit_core_full(t: DenseTensor3, factors, pinv_tol: float | None = None) -> DenseTensor3:
    """Least-squares core for fixed factors, fitted over every entry.

    Because the factors enter mode by mode, the normal equations separate
    and the minimum-norm optimum is the tensor contracted with the
    pseudoinverse of each factor's transpose.
    """
    f1, f2, f3 = _check_factors(t, factors)
    p1 = pinv(f1.T, pinv_tol)
    p2 = pinv(f2.T, pinv_tol)
    p3 = pinv(f3.T, pinv_tol)
    core = np.einsum("ijk,ai,bj,ck->abc", t.data, p1, p2, p3, optimize=True)
    return DenseTensor3(core)


def fit_core_cross(
    t: DenseTensor3,
    factors,
    sel: IndexSelection,
    pinv_tol: float | None = None,
) -> DenseTensor3:
    """Least-squares core fitted only on the entries of the cross sections.

    The fit runs over the union of the three sections induced by ``sel``
    (each sampled entry counted once).  A rank-deficient design yields
    the minimum-norm core and a :class:`RankDeficientDesignWarning`.
    """
    if sel.dims != t.dims:
        raise ValueError(f"selection dims {sel.dims} do not match tensor dims {t.dims}")
    f1, f2, f3 = _check_factors(t, factors)
    l1, l2, l3 = t.dims

    coords = set()
    coords.update((i, j, k) for i in range(l1) for j in sel.j_set for k in sel.k_set)
    coords.update((i, j, k) for i in sel.i_set for j in range(l2) for k in sel.k_set)
    coords.update((i, j, k) for i in sel.i_set for j in sel.j_set for k in range(l3))
    coords = sorted(coords)
    ci = np.array([c[0] for c in coords])
    cj = np.array([c[1] for c in coords])
    ck = np.array([c[2] for c in coords])

    design = np.einsum(
        "as,bs,cs->sabc", f1[:, ci], f2[:, cj], f3[:, ck], optimize=True
    ).reshape(len(coords), -1)
    rhs = t.data[ci, cj, ck]
    if numerical_rank(design) < design.shape[1]:
        warnings.warn(
            "sampled design matrix is rank deficient; returning the "
            "minimum-norm core",
            RankDeficientDesignWarning,
            stacklevel=2,
        )
    sol = pinv(design, pinv_tol) @ rhs
    dims = (f1.shape[0], f2.shape[0], f3.shape[0])
    return DenseTensor3(sol.reshape(dims))
