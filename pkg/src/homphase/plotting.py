"""Figure rendering for CLI reports (needs the optional ``matplotlib`` dependency)."""

from __future__ import annotations

from pathlib import Path

import numpy as np

# Derivative panels only draw samples whose whole stencil lies above this
# fraction of the peak intensity; elsewhere the recovered phase is noise.
DISPLAY_FLOOR = 1e-3
STENCIL_REACH = 3


def display_mask(intensity: np.ndarray) -> np.ndarray:
    above = intensity > DISPLAY_FLOOR * intensity.max()
    padded = np.pad(above, STENCIL_REACH, constant_values=False)
    windows = np.lib.stride_tricks.sliding_window_view(padded, 2 * STENCIL_REACH + 1)
    return windows.all(axis=1)


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    fig.savefig(path, dpi=120)
    fig.clear()
    _pyplot().close(fig)
    return path


def plot_simulation(path, tau, visibility, coincidence, omega, intensity, beta) -> Path:
    plt = _pyplot()
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 3.6), layout="constrained")
    ax1.plot(tau, coincidence, color="tab:blue", label="coincidence")
    ax1.plot(tau, visibility, color="tab:red", ls="--", label="visibility")
    ax1.set_xlabel("delay (ps)")
    ax1.legend(frameon=False)
    ax2.plot(omega - omega[len(omega) // 2], intensity, color="k")
    ax2.set_xlabel("frequency offset (rad/ps)")
    ax2.set_ylabel("intensity")
    twin = ax2.twinx()
    twin.plot(omega - omega[len(omega) // 2], beta, color="tab:green")
    twin.set_ylabel("beta (rad/km)", color="tab:green")
    return _save(fig, path)


def plot_retrieval(
    path,
    *,
    tau,
    target_coincidence,
    recovered_coincidence,
    omega,
    intensity,
    beta2_true,
    beta2_recovered,
    error_history,
    title: str = "",
) -> Path:
    """Three panels: coincidence traces, ``beta''`` profiles over the spectrum, convergence curve."""
    plt = _pyplot()
    fig, axes = plt.subplots(1, 3, figsize=(15, 4), layout="constrained")
    ax = axes[0]
    ax.plot(tau, target_coincidence, color="tab:blue", label="simulated")
    ax.plot(tau, recovered_coincidence, color="tab:red", ls=":", label="recovered")
    ax.set_xlabel("delay (ps)")
    ax.set_ylabel("normalized coincidence")
    ax.legend(frameon=False)

    ax = axes[1]
    x = omega - omega[len(omega) // 2]
    shown = display_mask(intensity)
    ax.plot(x, np.where(shown, beta2_true, np.nan), color="tab:blue", label="preset")
    ax.plot(x, np.where(shown, beta2_recovered, np.nan), color="tab:red", ls=":", label="recovered")
    ax.set_xlabel("frequency offset (rad/ps)")
    ax.set_ylabel("beta'' (ps^2/km)")
    ax.legend(frameon=False, loc="upper left")
    spec = ax.twinx()
    support = intensity > DISPLAY_FLOOR * intensity.max()
    spec.plot(x[support], intensity[support], color="k", lw=0.8)
    spec.set_ylabel("intensity")

    ax = axes[2]
    history = np.maximum(np.asarray(error_history), np.finfo(float).tiny)
    ax.plot(np.arange(len(history)), np.log10(history), color="k")
    ax.set_xlabel("iteration")
    ax.set_ylabel("log10 E")
    if title:
        fig.suptitle(title)
    return _save(fig, path)


def plot_dispersion(path, omega, beta2, intensity) -> Path:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 3.6), layout="constrained")
    x = omega - omega[len(omega) // 2]
    shown = display_mask(intensity)
    ax.plot(x, np.where(shown, beta2, np.nan), color="tab:red")
    ax.set_xlabel("frequency offset (rad/ps)")
    ax.set_ylabel("beta'' (ps^2/km)")
    return _save(fig, path)


def plot_jsp_map(path, jsp_map) -> Path:
    """Gauge-fixed phase of each slice over the signal frequency; masked entries blank."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4.5), layout="constrained")
    omega = jsp_map.signal_grid.omega
    x = omega - omega[len(omega) // 2]
    rows = jsp_map.mask.any(axis=1)
    if not rows.any():
        rows[:] = True
    data = np.where(jsp_map.mask, jsp_map.phase, np.nan)[rows]
    extent = (-0.5, len(jsp_map.idler_centers) - 0.5, x[rows][0], x[rows][-1])
    im = ax.imshow(data, aspect="auto", origin="lower", extent=extent, cmap="twilight_shifted")
    ax.set_xticks(range(len(jsp_map.idler_centers)))
    ax.set_xticklabels([f"{c:.3g}" for c in jsp_map.idler_centers])
    ax.set_xlabel("idler center offset (rad/ps)")
    ax.set_ylabel("signal frequency offset (rad/ps)")
    fig.colorbar(im, ax=ax, label="phase (rad)")
    return _save(fig, path)
