"""Deterministic SVG figures for the CLI artifacts."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed ids and no timestamp so reruns write identical files
_RC = {
    "svg.hashsalt": "isac-lab",
    "svg.fonttype": "none",
    "path.simplify": False,
    "font.family": "DejaVu Sans",
}
_META = {"Date": None, "Creator": "isac-lab"}


def _save(fig, path):
    fig.savefig(path, format="svg", metadata=_META)
    plt.close(fig)


def beampattern_svg(path, curves, title="Transmit beampattern"):
    """Normalized beampatterns; ``curves`` maps a label to ``(angle_deg, power_db)``."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6.4, 4.0))
        for label, (ang, db) in curves.items():
            ax.plot(ang, np.maximum(db, -60.0), label=label, linewidth=1.2)
        ax.set_xlabel("angle (deg)")
        ax.set_ylabel("normalized power (dB)")
        ax.set_xlim(-90, 90)
        ax.set_ylim(-60, 3)
        ax.set_title(title)
        ax.grid(True, linewidth=0.4)
        ax.legend(loc="lower right")
        fig.tight_layout()
        _save(fig, path)


def sweep_svg(path, x, series, xlabel="transmit power (dBm)", ylabel="secrecy rate (bit/s/Hz)",
              title="Secrecy rate"):
    """Line plot of ``series`` (label to values) against ``x``."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6.4, 4.0))
        for label, y in series.items():
            ax.plot(x, y, marker="o", label=label, linewidth=1.2)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.set_title(title)
        ax.grid(True, linewidth=0.4)
        ax.legend(loc="best")
        fig.tight_layout()
        _save(fig, path)


def ser_svg(path, snr_db, ser_by_receiver, title="Symbol error rate"):
    """Semilog SER curves; zero entries are drawn at the plot floor."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6.4, 4.0))
        floor = 1e-6
        for label, ser in ser_by_receiver.items():
            ax.semilogy(snr_db, np.maximum(np.asarray(ser, float), floor), marker="o", label=label,
                        linewidth=1.2)
        ax.set_xlabel("SNR (dB)")
        ax.set_ylabel("SER")
        ax.set_ylim(floor, 1.5)
        ax.set_title(title)
        ax.grid(True, which="both", linewidth=0.4)
        ax.legend(loc="lower left")
        fig.tight_layout()
        _save(fig, path)


def constellation_svg(path, points_by_receiver, title="Noiseless received points"):
    """Scatter of received points (rotated frames not applied)."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5.0, 5.0))
        for label, pts in points_by_receiver.items():
            pts = np.asarray(pts)
            ax.plot(pts.real, pts.imag, ".", markersize=2, label=label)
        ax.axhline(0, color="k", linewidth=0.5)
        ax.axvline(0, color="k", linewidth=0.5)
        ax.set_aspect("equal", adjustable="datalim")
        ax.set_xlabel("in-phase")
        ax.set_ylabel("quadrature")
        ax.set_title(title)
        ax.legend(loc="upper right", markerscale=4)
        fig.tight_layout()
        _save(fig, path)
