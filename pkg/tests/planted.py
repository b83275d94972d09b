"""Random conic programs with a known optimum (planted primal/dual pair)."""

import numpy as np
import scipy.sparse as sp

from isac_lab.conic import Cone, ConicProgram, svec


def _complementary_psd(rng, side):
    U, _ = np.linalg.qr(rng.standard_normal((side, side)))
    r = rng.integers(1, side)
    lam = np.concatenate([rng.uniform(0.5, 2.0, r), np.zeros(side - r)])
    mu = np.concatenate([np.zeros(r), rng.uniform(0.5, 2.0, side - r)])
    return svec((U * lam) @ U.T), svec((U * mu) @ U.T)


def _complementary_soc(rng, dim):
    d = rng.standard_normal(dim - 1)
    d /= np.linalg.norm(d)
    a, b = rng.uniform(0.5, 2.0, 2)
    # boundary points on opposite rays are orthogonal
    return np.concatenate([[a], a * d]), np.concatenate([[b], -b * d])


def planted_program(seed, kind="sdp", side=None, n=None):
    """Return (program, optimal objective) for a planted instance.

    ``kind="sdp"`` uses a nonnegative block plus one PSD block;
    ``kind="socp"`` uses a nonnegative block plus three second-order cones.
    """
    rng = np.random.default_rng(seed)
    n_lin = 8
    s_parts, z_parts, cones = [], [], []
    s_lin = np.where(rng.random(n_lin) < 0.5, rng.uniform(0.5, 2, n_lin), 0.0)
    z_lin = np.where(s_lin == 0, rng.uniform(0.5, 2, n_lin), 0.0)
    s_parts.append(s_lin)
    z_parts.append(z_lin)
    cones.append(Cone("nonneg", n_lin))
    if kind == "sdp":
        side = side or int(rng.integers(3, 17))
        s_psd, z_psd = _complementary_psd(rng, side)
        s_parts.append(s_psd)
        z_parts.append(z_psd)
        cones.append(Cone("psd", side))
    else:
        for _ in range(3):
            dim = int(rng.integers(3, 8))
            s_c, z_c = _complementary_soc(rng, dim)
            s_parts.append(s_c)
            z_parts.append(z_c)
            cones.append(Cone("soc", dim))
    s = np.concatenate(s_parts)
    z = np.concatenate(z_parts)
    m = len(s)
    n = n or max(2, m // 2)
    A = rng.standard_normal((m, n))
    x = rng.standard_normal(n)
    b = A @ x + s
    c = -A.T @ z
    return ConicProgram(c, sp.csr_matrix(A), b, cones), float(c @ x)
