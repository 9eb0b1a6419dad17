"""Subspaces of Euclidean space and orthogonal projections of 3-tensors.

A ``Subspace`` is a point on a Grassmannian, represented concretely by an
orthonormal column frame.  A ``SubspaceTriple`` combines one subspace per
tensor mode; projecting a tensor onto the triple's tensor product and
measuring the projection distance are the basic operations the
approximation solvers are built from.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor_core import DenseTensor3, as_matrix, hs_norm, numerical_rank

#: Per-entry tolerance for accepting a frame as orthonormal.
ORTHO_TOL = 1e-10


class Subspace:
    """A ``dim``-dimensional subspace of R^``ambient_dim``.

    Stored as an ``(ambient_dim, dim)`` matrix with orthonormal columns.
    The frame is validated on construction (``F.T @ F`` must equal the
    identity to within :data:`ORTHO_TOL` per entry) and kept immutable.
    """

    __slots__ = ("_frame",)

    def __init__(self, frame) -> None:
        f = np.array(as_matrix(frame, "frame"), copy=True)
        m, k = f.shape
        if k > m:
            raise ValueError(
                f"frame has more columns ({k}) than rows ({m}); a subspace "
                "dimension cannot exceed the ambient dimension"
            )
        gram = f.T @ f
        defect = float(np.max(np.abs(gram - np.eye(k))))
        if defect > ORTHO_TOL:
            raise ValueError(
                f"frame columns are not orthonormal (max Gram defect {defect:.3e})"
            )
        f.flags.writeable = False
        self._frame = f

    @property
    def frame(self) -> np.ndarray:
        """Read-only ``(ambient_dim, dim)`` orthonormal frame."""
        return self._frame

    @property
    def ambient_dim(self) -> int:
        return self._frame.shape[0]

    @property
    def dim(self) -> int:
        return self._frame.shape[1]

    def __repr__(self) -> str:
        return f"Subspace(ambient_dim={self.ambient_dim}, dim={self.dim})"


@dataclass(frozen=True)
class SubspaceTriple:
    """One subspace per tensor mode."""

    x: Subspace
    y: Subspace
    z: Subspace

    @property
    def ambient_dims(self) -> tuple[int, int, int]:
        return (self.x.ambient_dim, self.y.ambient_dim, self.z.ambient_dim)

    @property
    def dims(self) -> tuple[int, int, int]:
        return (self.x.dim, self.y.dim, self.z.dim)


def subspace_from_columns(m) -> Subspace:
    """Subspace spanned by the columns of ``m`` (orthonormalized via QR).

    The columns must be numerically independent; otherwise the span is
    ambiguous and a ``ValueError`` is raised.
    """
    a = as_matrix(m)
    rank = numerical_rank(a)
    if rank < a.shape[1]:
        raise ValueError(
            f"columns are rank deficient: numerical rank {rank} < {a.shape[1]}"
        )
    q, _ = np.linalg.qr(a)
    return Subspace(q)


def _check_triple(t: DenseTensor3, s: SubspaceTriple) -> None:
    if s.ambient_dims != t.dims:
        raise ValueError(
            f"subspace ambient dims {s.ambient_dims} do not match tensor dims {t.dims}"
        )


def coefficient_tensor(t: DenseTensor3, s: SubspaceTriple) -> DenseTensor3:
    """Coordinates of the projection of ``t`` in the frames of ``s``.

    Entry ``(a, b, c)`` is the inner product of ``t`` with
    ``x_a (x) y_b (x) z_c``, the rank-one tensor built from the frames'
    columns.  The result has shape ``s.dims``.
    """
    _check_triple(t, s)
    c = np.einsum(
        "ijk,ia,jb,kc->abc",
        t.data,
        s.x.frame,
        s.y.frame,
        s.z.frame,
        optimize=True,
    )
    return DenseTensor3(c)


def project(t: DenseTensor3, s: SubspaceTriple) -> DenseTensor3:
    """Orthogonal projection of ``t`` onto the tensor product of ``s``."""
    c = coefficient_tensor(t, s)
    p = np.einsum(
        "abc,ia,jb,kc->ijk",
        c.data,
        s.x.frame,
        s.y.frame,
        s.z.frame,
        optimize=True,
    )
    return DenseTensor3(p)


def distance(t: DenseTensor3, s: SubspaceTriple) -> float:
    """Distance from ``t`` to the tensor product of the triple ``s``.

    By Pythagoras this equals ``sqrt(|t|^2 - |coefficient_tensor|^2)``;
    the radicand is clamped at zero to absorb roundoff.
    """
    c = coefficient_tensor(t, s)
    radicand = hs_norm(t) ** 2 - hs_norm(c) ** 2
    return float(np.sqrt(max(radicand, 0.0)))
