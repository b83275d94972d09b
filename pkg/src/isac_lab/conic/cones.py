"""Cone definitions, scaled symmetric vectorization and Euclidean projections."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..array import ValidationError, check_hermitian

SQRT2 = np.sqrt(2.0)

ZERO, NONNEG, SOC, PSD = "zero", "nonneg", "soc", "psd"


@dataclass(frozen=True)
class Cone:
    """One segment of a cone product.

    ``size`` is the matrix side for ``psd`` and the vector length otherwise.
    """

    kind: str
    size: int

    def __post_init__(self):
        if self.kind not in (ZERO, NONNEG, SOC, PSD):
            raise ValidationError(f"unknown cone kind {self.kind!r}")
        if self.size < 1:
            raise ValidationError(f"cone size must be positive, got {self.size}")

    @property
    def dim(self) -> int:
        if self.kind == PSD:
            return self.size * (self.size + 1) // 2
        return self.size

    def __str__(self):
        return f"{self.kind}({self.size})"


def svec_indices(side: int):
    """Row/column indices of the lower triangle in column-major order."""
    cols, rows = np.triu_indices(side)
    return rows, cols


_SVEC_CACHE: dict = {}


def _svec_layout(side):
    layout = _SVEC_CACHE.get(side)
    if layout is None:
        rows, cols = svec_indices(side)
        scale = np.where(rows == cols, 1.0, SQRT2)
        layout = (rows, cols, scale)
        _SVEC_CACHE[side] = layout
    return layout


def svec(S: np.ndarray) -> np.ndarray:
    """Scaled vectorization of a symmetric matrix (off-diagonals times sqrt 2).

    With this scaling ``svec(A) @ svec(B) == trace(A @ B)``.
    """
    rows, cols, scale = _svec_layout(S.shape[0])
    return S[rows, cols] * scale


def smat(v: np.ndarray) -> np.ndarray:
    side = int(round((np.sqrt(8 * len(v) + 1) - 1) / 2))
    if side * (side + 1) // 2 != len(v):
        raise ValidationError(f"length {len(v)} is not a triangular number")
    rows, cols, scale = _svec_layout(side)
    S = np.zeros((side, side))
    S[rows, cols] = v / scale
    S[cols, rows] = v / scale
    return S


def embed_hermitian(H) -> np.ndarray:
    """Real symmetric embedding ``[[Re H, -Im H], [Im H, Re H]]``."""
    H = check_hermitian(H, "H")
    re, im = H.real, H.imag
    return np.block([[re, -im], [im, re]])


def unembed_hermitian(S: np.ndarray) -> np.ndarray:
    """Hermitian matrix closest to a real 2N x 2N symmetric embedding."""
    n = S.shape[0] // 2
    re = 0.5 * (S[:n, :n] + S[n:, n:])
    im = 0.5 * (S[n:, :n] - S[:n, n:])
    return re + 1j * im


def project_psd(S: np.ndarray) -> np.ndarray:
    """Nearest positive semidefinite matrix in Frobenius norm."""
    S = 0.5 * (S + S.T)
    w, V = np.linalg.eigh(S)
    if w[0] >= 0:
        return S
    w = np.clip(w, 0.0, None)
    return (V * w) @ V.T


def project_soc(v: np.ndarray) -> np.ndarray:
    """Projection onto ``{(t, x) : ||x|| <= t}``."""
    v = np.asarray(v, dtype=float)
    t, x = v[0], v[1:]
    nx = np.linalg.norm(x)
    if nx <= t:
        return v.copy()
    if nx <= -t:
        return np.zeros_like(v)
    a = 0.5 * (t + nx)
    out = np.empty_like(v)
    out[0] = a
    out[1:] = (a / nx) * x
    return out


def _project_psd_svec(v):
    side = int(round((np.sqrt(8 * len(v) + 1) - 1) / 2))
    rows, cols, scale = _svec_layout(side)
    S = np.zeros((side, side))
    S[rows, cols] = v / scale
    S[cols, rows] = v / scale
    w, V = np.linalg.eigh(S)
    if w[0] >= 0:
        return v.copy()
    pos = w > 0
    Vp = V[:, pos]
    P = (Vp * w[pos]) @ Vp.T
    return P[rows, cols] * scale


def project_cone(v: np.ndarray, cones, dual: bool = False) -> np.ndarray:
    """Project onto the product cone (or its dual when ``dual``).

    All cones used here are self-dual except the zero cone, whose dual is
    the whole space.
    """
    out = np.empty_like(v)
    i = 0
    for cone in cones:
        seg = v[i:i + cone.dim]
        if cone.kind == ZERO:
            out[i:i + cone.dim] = seg if dual else 0.0
        elif cone.kind == NONNEG:
            out[i:i + cone.dim] = np.maximum(seg, 0.0)
        elif cone.kind == SOC:
            out[i:i + cone.dim] = project_soc(seg)
        else:
            out[i:i + cone.dim] = _project_psd_svec(seg)
        i += cone.dim
    return out


def cone_distance(v: np.ndarray, cones, dual: bool = False) -> float:
    """Infinity-norm distance from ``v`` to the product cone."""
    if len(v) == 0:
        return 0.0
    return float(np.max(np.abs(v - project_cone(v, cones, dual=dual))))
