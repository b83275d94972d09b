"""Standard-form conic programs and a small incremental builder.

A program is ``min c'x  s.t.  A x + s = b,  s in K`` where ``K`` is an ordered
product of zero, nonnegative, second-order and PSD cones that partitions the
rows of ``A``. The zero cone encodes equalities.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..array import ValidationError
from .cones import NONNEG, PSD, SOC, ZERO, Cone, _svec_layout

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
MAX_ITER = "max_iter"


@dataclass
class ConicProgram:
    c: np.ndarray
    A: sp.csr_matrix
    b: np.ndarray
    cones: list

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        self.b = np.asarray(self.b, dtype=float).ravel()
        self.A = sp.csr_matrix(self.A, dtype=float)
        self.cones = [c if isinstance(c, Cone) else Cone(*c) for c in self.cones]
        m, n = self.A.shape
        if len(self.c) != n:
            raise ValidationError(f"objective has length {len(self.c)} but A has {n} columns")
        if len(self.b) != m:
            raise ValidationError(f"b has length {len(self.b)} but A has {m} rows")
        total = sum(c.dim for c in self.cones)
        if total != m:
            raise ValidationError(f"cone segments cover {total} rows, A has {m}")
        if not (np.all(np.isfinite(self.c)) and np.all(np.isfinite(self.b))
                and np.all(np.isfinite(self.A.data))):
            raise ValidationError("program data contains non-finite values")

    @property
    def num_vars(self) -> int:
        return self.A.shape[1]

    @property
    def num_rows(self) -> int:
        return self.A.shape[0]


@dataclass
class ConicSolution:
    primal: np.ndarray
    dual: np.ndarray
    slack: np.ndarray
    status: str
    primal_residual: float
    dual_residual: float
    gap: float
    objective: float
    iterations: int
    info: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def dump_program(prog: ConicProgram, path) -> None:
    """Write a program as plain-text triplets for cross-checking elsewhere.

    Header lines start with ``%``; they list the cone layout and sizes. Then
    three sections follow, each introduced by a ``%`` tag: ``A`` triplets
    (row col value, 1-based), the ``b`` entries and the ``c`` entries.
    """
    A = prog.A.tocoo()
    with open(path, "w") as fh:
        fh.write("%%ConicProgram standard form: min c'x s.t. Ax + s = b, s in K\n")
        fh.write(f"% rows {prog.num_rows} cols {prog.num_vars} nnz {A.nnz}\n")
        fh.write("% cones " + " ".join(str(c) for c in prog.cones) + "\n")
        fh.write("% A\n")
        order = np.lexsort((A.col, A.row))
        for r, c, v in zip(A.row[order], A.col[order], A.data[order]):
            fh.write(f"{r + 1} {c + 1} {v:.17g}\n")
        fh.write("% b\n")
        for i, v in enumerate(prog.b):
            if v != 0:
                fh.write(f"{i + 1} {v:.17g}\n")
        fh.write("% c\n")
        for i, v in enumerate(prog.c):
            if v != 0:
                fh.write(f"{i + 1} {v:.17g}\n")


def load_program(path) -> ConicProgram:
    """Inverse of :func:`dump_program`."""
    rows, cols, vals, bvals, cvals = [], [], [], {}, {}
    cones, m, n, section = [], 0, 0, None
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("%"):
                parts = line.lstrip("%").split()
                if parts and parts[0] == "rows":
                    m, n = int(parts[1]), int(parts[3])
                elif parts and parts[0] == "cones":
                    for tok in parts[1:]:
                        kind, size = tok.rstrip(")").split("(")
                        cones.append(Cone(kind, int(size)))
                elif parts in (["A"], ["b"], ["c"]):
                    section = parts[0]
                continue
            fields = line.split()
            if section == "A":
                rows.append(int(fields[0]) - 1)
                cols.append(int(fields[1]) - 1)
                vals.append(float(fields[2]))
            elif section == "b":
                bvals[int(fields[0]) - 1] = float(fields[1])
            elif section == "c":
                cvals[int(fields[0]) - 1] = float(fields[1])
    A = sp.csr_matrix((vals, (rows, cols)), shape=(m, n))
    b = np.zeros(m)
    c = np.zeros(n)
    for i, v in bvals.items():
        b[i] = v
    for i, v in cvals.items():
        c[i] = v
    return ConicProgram(c, A, b, cones)


def hermitian_basis(n: int) -> np.ndarray:
    """Real-coordinate basis of n x n Hermitian matrices, shape (n*n, n, n).

    Coordinates are the diagonal, then real parts of the strict lower
    triangle, then imaginary parts of the strict lower triangle.
    """
    rows, cols = np.tril_indices(n, -1)
    nl = len(rows)
    B = np.zeros((n * n, n, n), dtype=complex)
    idx = np.arange(n)
    B[idx, idx, idx] = 1.0
    k = n + np.arange(nl)
    B[k, rows, cols] = 1.0
    B[k, cols, rows] = 1.0
    k = n + nl + np.arange(nl)
    B[k, rows, cols] = 1j
    B[k, cols, rows] = -1j
    return B


def hermitian_coords(H: np.ndarray) -> np.ndarray:
    """Coordinates of a Hermitian matrix in :func:`hermitian_basis`."""
    n = H.shape[0]
    rows, cols = np.tril_indices(n, -1)
    return np.concatenate([H.diagonal().real, H[rows, cols].real, H[rows, cols].imag])


def hermitian_from_coords(x: np.ndarray, n: int) -> np.ndarray:
    rows, cols = np.tril_indices(n, -1)
    nl = len(rows)
    H = np.diag(x[:n].astype(complex))
    low = x[n:n + nl] + 1j * x[n + nl:n + 2 * nl]
    H[rows, cols] = low
    H[cols, rows] = low.conj()
    return H


def embedded_svec_rows(terms: np.ndarray) -> np.ndarray:
    """``svec(embed(T_p))`` for a stack of Hermitian matrices, shape (p, dim)."""
    d = terms.shape[1]
    re, im = terms.real, terms.imag
    E = np.empty((terms.shape[0], 2 * d, 2 * d))
    E[:, :d, :d] = re
    E[:, d:, d:] = re
    E[:, :d, d:] = -im
    E[:, d:, :d] = im
    rows, cols, scale = _svec_layout(2 * d)
    return E[:, rows, cols] * scale


class ProgramBuilder:
    """Accumulates variables, constraints and an objective into a program.

    Declare every variable block with :meth:`variable` before adding rows.
    Row blocks are given as dense or sparse matrices over the full variable
    vector.
    """

    def __init__(self):
        self._vars: dict[str, slice] = {}
        self._n = 0
        self._frozen = False
        self._blocks = {ZERO: [], NONNEG: [], SOC: [], PSD: []}
        self._tags = {ZERO: [], NONNEG: []}
        self.c = None

    def variable(self, name: str, size: int) -> slice:
        if self._frozen:
            raise ValidationError("declare all variables before adding constraints")
        if name in self._vars:
            raise ValidationError(f"variable {name!r} declared twice")
        sl = slice(self._n, self._n + size)
        self._vars[name] = sl
        self._n += size
        return sl

    def __getitem__(self, name) -> slice:
        return self._vars[name]

    @property
    def num_vars(self) -> int:
        return self._n

    def _rows(self, G):
        self._frozen = True
        if sp.issparse(G):
            G = sp.csr_matrix(G)
        else:
            G = np.atleast_2d(np.asarray(G, dtype=float))
        if G.shape[1] != self._n:
            raise ValidationError(f"row block has {G.shape[1]} columns, expected {self._n}")
        return G

    def dense_rows(self, count: int) -> np.ndarray:
        return np.zeros((count, self._n))

    def eq(self, G, h, tag="eq"):
        """Rows ``G x == h``."""
        G = self._rows(G)
        self._blocks[ZERO].append((G, np.broadcast_to(np.asarray(h, float), (G.shape[0],)).copy()))
        self._tags[ZERO].extend([tag] * G.shape[0])

    def le(self, G, h, tag="le"):
        """Rows ``G x <= h``."""
        G = self._rows(G)
        self._blocks[NONNEG].append((G, np.broadcast_to(np.asarray(h, float), (G.shape[0],)).copy()))
        self._tags[NONNEG].extend([tag] * G.shape[0])

    def ge(self, G, h, tag="ge"):
        """Rows ``G x >= h``."""
        G = self._rows(G)
        self.le(-G, -np.asarray(h, float), tag=tag)

    def soc(self, G, h):
        """``G x + h`` lies in the second-order cone (first entry is the bound)."""
        G = self._rows(G)
        self._blocks[SOC].append((-G, np.asarray(h, float).copy()))

    def psd(self, G, h, side):
        """``G x + h`` (an svec of a side x side matrix) is PSD."""
        G = self._rows(G)
        self._blocks[PSD].append((-G, np.asarray(h, float).copy(), side))

    def hermitian_psd(self, terms, constant):
        """Constrain ``constant + sum_j x[sl_j] . T_j`` to be Hermitian PSD.

        ``terms`` is a list of ``(slice, tensor)`` where ``tensor`` has shape
        (slice length, d, d). The constraint goes through the real embedding.
        """
        d = np.asarray(constant).shape[0]
        dim = (2 * d) * (2 * d + 1) // 2
        G = sp.csr_matrix((dim, self._n))
        for sl, T in terms:
            rows = embedded_svec_rows(np.asarray(T, dtype=complex))
            coo = sp.coo_matrix(rows.T)
            G = G + sp.csr_matrix((coo.data, (coo.row, coo.col + sl.start)), shape=(dim, self._n))
        h = embedded_svec_rows(np.asarray(constant, dtype=complex)[None])[0]
        self.psd(G, h, 2 * d)

    def objective(self, c):
        c = np.asarray(c, dtype=float)
        if c.shape != (self._n,):
            raise ValidationError(f"objective must have length {self._n}")
        self.c = c

    def row_tags(self):
        """Tags of the nonnegative rows in program order."""
        return list(self._tags[NONNEG])

    def build(self) -> ConicProgram:
        self._frozen = True
        mats, rhs, cones = [], [], []
        for kind in (ZERO, NONNEG):
            blocks = self._blocks[kind]
            if blocks:
                size = sum(G.shape[0] for G, _ in blocks)
                mats.extend(sp.csr_matrix(G) for G, _ in blocks)
                rhs.extend(h for _, h in blocks)
                cones.append(Cone(kind, size))
        for G, h in self._blocks[SOC]:
            mats.append(sp.csr_matrix(G))
            rhs.append(h)
            cones.append(Cone(SOC, G.shape[0]))
        for G, h, side in self._blocks[PSD]:
            mats.append(sp.csr_matrix(G))
            rhs.append(h)
            cones.append(Cone(PSD, side))
        A = sp.vstack(mats, format="csr") if mats else sp.csr_matrix((0, self._n))
        b = np.concatenate(rhs) if rhs else np.zeros(0)
        c = self.c if self.c is not None else np.zeros(self._n)
        return ConicProgram(c, A, b, cones)

    def nonneg_offset(self) -> int:
        """Row index where the nonnegative segment starts."""
        return sum(G.shape[0] for G, _ in self._blocks[ZERO])
