"""Assembly of the secure-beamforming feasibility and design programs.

All quantities are normalized by the power budget ``P`` so the stream
covariances satisfy ``sum_k tr(R_k) <= 1``. Streams are parametrized either
as full Hermitian covariances (the semidefinite relaxation) or as
nonnegative powers along fixed unit directions (used after rank-one
extraction). Both share every constraint family below.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .array import AngleInterval, angular_resolution, mainlobe_mask, steering_matrix
from .conic import ConicProgram, ProgramBuilder, hermitian_basis

FAMILIES = ("sinr", "power", "floor", "ceiling", "eve_cap")


def quad_coeffs(basis: np.ndarray, G: np.ndarray) -> np.ndarray:
    """``g^H B_p g`` for every row ``g`` of ``G`` and basis element ``p``."""
    G = np.atleast_2d(G)
    return np.einsum("li,pij,lj->lp", G.conj(), basis, G, optimize=True).real


def diagonal_sums(basis: np.ndarray) -> np.ndarray:
    """Map from basis coordinates to ``[c_0, Re c_1.., Im c_1..]``.

    ``c_d`` is the sum of the ``d``-th superdiagonal; the beampattern of a
    uniform linear array depends on the covariance only through these.
    """
    n = basis.shape[1]
    sums = np.stack([np.trace(basis, offset=d, axis1=1, axis2=2) for d in range(n)])
    return np.vstack([sums[0].real, sums[1:].real, sums[1:].imag])


def trig_rows(geometry, angles) -> np.ndarray:
    """Rows mapping diagonal sums to beampattern values at ``angles``."""
    n = geometry.num_elements
    psi = 2 * np.pi * geometry.spacing_wavelengths * np.sin(np.asarray(angles, float))
    d = np.arange(1, n)
    arg = np.multiply.outer(psi, d)
    return np.hstack([np.ones((len(psi), 1)), 2 * np.cos(arg), -2 * np.sin(arg)])


def sidelobe_mask(region, geometry, grid, transition=None) -> np.ndarray:
    """Grid samples farther than ``transition`` from the mainlobe region."""
    if transition is None:
        transition = angular_resolution(geometry)
    widen = angular_resolution(geometry) / 2 + transition
    return ~mainlobe_mask(region, geometry, grid, widen=widen)


@dataclass
class DesignSpec:
    """What the eavesdropper caps and the sensing floor are imposed over."""

    eve_angles: np.ndarray
    mainlobe: object
    csi_radii: np.ndarray | None = None
    protect: list = field(default_factory=list)


@dataclass
class Layout:
    streams: list
    pattern: slice
    tau: slice | None = None
    eta: slice | None = None
    mu: slice | None = None
    slack: slice | None = None
    families: tuple = ()


class Formulation:
    """Builds conic programs for one scenario and one stream parametrization.

    ``directions=None`` gives the covariance (relaxed) model; otherwise
    ``directions`` is a list of K unit vectors and the variables are the
    per-stream powers.
    """

    def __init__(self, scenario, spec: DesignSpec, directions=None):
        if scenario.power_budget <= 0:
            raise ValueError("formulation requires a positive power budget")
        self.scenario = scenario
        self.spec = spec
        geo = scenario.geometry
        n = geo.num_elements
        K = scenario.num_users
        self.n = n
        self.K = K
        self.P = float(scenario.power_budget)
        if directions is None:
            B = hermitian_basis(n)
            self.bases = [B] * K
            self.covariance_mode = True
        else:
            self.bases = [np.outer(u, u.conj())[None] for u in directions]
            self.covariance_mode = False
        self.gamma = float(scenario.user_sinr_threshold)
        ch = scenario.channels

        bp = scenario.beampattern
        grid = bp.grid
        ml = mainlobe_mask(spec.mainlobe, geo, grid)
        self.floor_rows = trig_rows(geo, grid[ml]) if bp.floor_fraction > 0 else None
        self.sensing_rows = trig_rows(geo, grid[ml])
        if np.isfinite(bp.sidelobe_cap_fraction):
            sl = sidelobe_mask(spec.mainlobe, geo, grid, bp.transition)
            self.ceiling_rows = trig_rows(geo, grid[sl]) if sl.any() else None
        else:
            self.ceiling_rows = None
        self.diag_maps = [diagonal_sums(B) for B in self.bases]
        self.trace_coeffs = [np.trace(B, axis1=1, axis2=2).real for B in self.bases]

        H = np.array(ch.user_channels)
        self.H = H
        self.user_quads = [quad_coeffs(B, H) for B in self.bases]  # [j] -> (K users, p)
        alpha2 = abs(ch.target_gain) ** 2
        self.has_eve = alpha2 > 0 and len(spec.eve_angles) > 0
        if self.has_eve:
            Aeve = steering_matrix(geo, spec.eve_angles)
            self.eve_quads = [quad_coeffs(B, Aeve) / n for B in self.bases]  # [j] -> (L, p)
            self.eve_noise = ch.noise_power_eve / (alpha2 * self.P * n)
        self.user_noise = ch.noise_power_user / self.P

    # -- program assembly -------------------------------------------------

    def build(self, t=None, objective="feasibility", elastic=False):
        """Assemble the program.

        ``t`` is the eavesdropping SINR cap (``None`` drops the caps).
        ``objective``: ``"feasibility"``, ``"phase1"`` (minimize the
        violation ``tau`` of the caps), ``"sensing"`` (maximize the minimum
        mainlobe gain) or ``"power"`` (minimize transmit power). With
        ``elastic`` every constraint family gets its own nonnegative slack
        and the objective becomes the total slack.
        """
        K, n = self.K, self.n
        pb = ProgramBuilder()
        streams = [pb.variable(f"x{k}", self.bases[k].shape[0]) for k in range(K)]
        pattern = pb.variable("r", 2 * n - 1)
        robust = self.spec.csi_radii is not None and np.any(self.spec.csi_radii > 0)
        mu = pb.variable("mu", K) if robust else None
        caps = t is not None and self.has_eve
        families = tuple(f for f in FAMILIES if f != "eve_cap" or caps)
        slack = pb.variable("slack", len(families)) if elastic else None
        tau = pb.variable("tau", 1) if objective == "phase1" else None
        eta = pb.variable("eta", 1) if objective == "sensing" else None
        nv = pb.num_vars

        def slack_col(G, family, sign):
            if slack is not None and family in families:
                G[:, slack.start + families.index(family)] = sign
            return G

        # stream cones
        for k, sl in enumerate(streams):
            if self.covariance_mode:
                pb.hermitian_psd([(sl, self.bases[k])], np.zeros((n, n)))
            else:
                G = pb.dense_rows(1)
                G[0, sl.start] = 1.0
                pb.ge(G, 0.0, tag="stream_power")

        # pattern coordinates
        G = sp.lil_matrix((2 * n - 1, nv))
        G[:, pattern] = sp.eye(2 * n - 1)
        G = G.tocsr()
        for k, sl in enumerate(streams):
            D = sp.csr_matrix((-self.diag_maps[k].ravel(),
                               (np.repeat(np.arange(2 * n - 1), self.diag_maps[k].shape[1]),
                                np.tile(np.arange(sl.start, sl.stop), 2 * n - 1))),
                              shape=(2 * n - 1, nv))
            G = G + D
        pb.eq(G, 0.0, tag="pattern")

        # power budget
        G = pb.dense_rows(1)
        for k, sl in enumerate(streams):
            G[0, sl] = self.trace_coeffs[k]
        pb.le(slack_col(G, "power", -1.0), 1.0, tag="power")

        # sensing floor and sidelobe ceiling
        bp = self.scenario.beampattern
        if self.floor_rows is not None:
            G = pb.dense_rows(len(self.floor_rows))
            G[:, pattern] = self.floor_rows
            pb.ge(slack_col(G, "floor", 1.0), bp.floor_fraction, tag="floor")
        if self.ceiling_rows is not None:
            G = pb.dense_rows(len(self.ceiling_rows))
            G[:, pattern] = self.ceiling_rows
            pb.le(slack_col(G, "ceiling", -1.0), bp.sidelobe_cap_fraction, tag="ceiling")
        if eta is not None:
            G = pb.dense_rows(len(self.sensing_rows))
            G[:, pattern] = self.sensing_rows
            G[:, eta.start] = -1.0
            pb.ge(G, 0.0, tag="sensing")
            G = pb.dense_rows(1)
            G[0, eta.start] = 1.0
            pb.le(G, float(n), tag="sensing_bound")

        # user SINR
        radii = self.spec.csi_radii
        for k in range(K):
            eps = 0.0 if radii is None else float(radii[k])
            if eps > 0:
                self._add_sinr_lmi(pb, streams, mu, slack, families, k, eps)
            else:
                # (q_kk - gamma sum_j q_kj) / |h_k|^2 >= gamma noise / |h_k|^2
                G = pb.dense_rows(1)
                scale = 1.0 / max(np.vdot(self.H[k], self.H[k]).real, 1e-300)
                for j, sl in enumerate(streams):
                    w = 1.0 if j == k else -self.gamma
                    G[0, sl] = w * scale * self.user_quads[j][k]
                pb.ge(slack_col(G, "sinr", 1.0), self.gamma * self.user_noise * scale, tag="sinr")
        if mu is not None:
            G = pb.dense_rows(K)
            G[np.arange(K), np.arange(mu.start, mu.stop)] = 1.0
            pb.ge(G, 0.0, tag="mu")

        # eavesdropper caps
        if caps:
            rows, rhs = [], []
            L = len(self.spec.eve_angles)
            for k in self.spec.protect:
                for l in range(L):
                    g = np.zeros(nv)
                    for j, sl in enumerate(streams):
                        g[sl] = self.eve_quads[j][l] if j == k else -t * self.eve_quads[j][l]
                    rows.append(g / (1 + t))
                    rhs.append(t * self.eve_noise / (1 + t))
            G = np.array(rows)
            if tau is not None:
                G[:, tau.start] = -1.0
            pb.le(slack_col(G, "eve_cap", -1.0), np.array(rhs), tag="eve_cap")
        if tau is not None:
            G = pb.dense_rows(1)
            G[0, tau.start] = 1.0
            pb.ge(G, -1.0, tag="tau_bound")

        if slack is not None:
            G = pb.dense_rows(len(families))
            G[np.arange(len(families)), np.arange(slack.start, slack.stop)] = 1.0
            pb.ge(G, 0.0, tag="slack")

        c = np.zeros(nv)
        if elastic:
            c[slack] = 1.0
        elif objective == "phase1":
            c[tau] = 1.0
        elif objective == "sensing":
            c[eta] = -1.0
        elif objective == "mean":
            c[pattern] = -self.sensing_rows.mean(axis=0)
        elif objective == "power":
            for k, sl in enumerate(streams):
                c[sl] = self.trace_coeffs[k]
        pb.objective(c)
        layout = Layout(streams, pattern, tau, eta, mu, slack, families if elastic else ())
        prog = pb.build()
        prog.row_tags = pb.row_tags()
        return prog, layout

    def _add_sinr_lmi(self, pb, streams, mu, slack, families, k, eps):
        """Worst-case SINR over ``||e|| <= eps`` via the S-procedure.

        With ``Q = R_k - gamma sum_{j!=k} R_j`` and estimate ``h``, require
        ``[[Q + mu I, Q h], [h^H Q, h^H Q h - gamma noise - mu eps^2]] >= 0``
        (scaled by ``1/|h|^2`` like the nominal row).
        """
        n = self.n
        h = self.H[k]
        scale = 1.0 / max(np.vdot(h, h).real, 1e-300)
        terms = []
        for j, sl in enumerate(streams):
            B = self.bases[j]
            w = (1.0 if j == k else -self.gamma) * scale
            Bh = B @ h
            T = np.zeros((B.shape[0], n + 1, n + 1), dtype=complex)
            T[:, :n, :n] = B
            T[:, :n, n] = Bh
            T[:, n, :n] = Bh.conj()
            T[:, n, n] = np.einsum("i,pi->p", h.conj(), Bh)
            terms.append((sl, w * T))
        M = np.zeros((1, n + 1, n + 1), dtype=complex)
        M[0, :n, :n] = np.eye(n) * scale
        M[0, n, n] = -eps ** 2 * scale
        terms.append((slice(mu.start + k, mu.start + k + 1), M))
        if slack is not None:
            S = np.zeros((1, n + 1, n + 1), dtype=complex)
            S[0, n, n] = 1.0
            i = slack.start + families.index("sinr")
            terms.append((slice(i, i + 1), S))
        const = np.zeros((n + 1, n + 1), dtype=complex)
        const[n, n] = -self.gamma * self.user_noise * scale
        pb.hermitian_psd(terms, const)

    # -- decoding ----------------------------------------------------------

    def covariances(self, x, layout) -> list:
        """Stream covariances in absolute (unnormalized) power units."""
        out = []
        for k, sl in enumerate(layout.streams):
            R = np.einsum("p,pij->ij", x[sl], self.bases[k])
            out.append(self.P * 0.5 * (R + R.conj().T))
        return out


def eve_angle_set(region, num_samples=None):
    """Angles at which eavesdropping caps are imposed."""
    if isinstance(region, AngleInterval):
        from .robust import sample_angle_interval
        return sample_angle_interval(region, num_samples or 1)
    return np.array([float(region)])
