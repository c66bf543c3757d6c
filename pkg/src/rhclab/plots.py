"""Figure rendering for the CLI report path (written next to the CSV/JSON outputs)."""

from __future__ import annotations

import numpy as np


def _plt():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def save_trajectory_figure(trajectory, path) -> None:
    plt = _plt()
    t = trajectory.times
    fig, axes = plt.subplots(2, 2, figsize=(10, 7), dpi=120)
    axes[0, 0].plot(t, np.linalg.norm(trajectory.states, axis=1))
    axes[0, 0].set_xlabel("t")
    axes[0, 0].set_ylabel(r"$\|x_t\|$")
    axes[0, 0].set_title("state norm")

    costs = np.maximum(trajectory.stage_costs, 1e-18)
    axes[0, 1].semilogy(t, costs)
    axes[0, 1].set_xlabel("t")
    axes[0, 1].set_ylabel("stage cost")
    axes[0, 1].set_title("per-step cost")

    axes[1, 0].plot(t, trajectory.values)
    axes[1, 0].set_xlabel("t")
    axes[1, 0].set_ylabel("horizon value")
    axes[1, 0].set_title("cost-to-go along the run")

    axes[1, 1].plot(t, np.linalg.norm(trajectory.disturbances, axis=1))
    axes[1, 1].set_xlabel("t")
    axes[1, 1].set_ylabel(r"$\|w_t\|$")
    axes[1, 1].set_title("disturbance norm")
    if trajectory.estimation_end is not None:
        for ax in axes.ravel():
            ax.axvline(trajectory.estimation_end, color="gray", ls="--", lw=0.8)
    fig.suptitle(f"{trajectory.controller} run, T={trajectory.T}")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def save_regret_figure(trajectory, gammas, threshold, path) -> None:
    from .analysis import attenuation_regret

    plt = _plt()
    gam = np.unique(np.concatenate([np.asarray(gammas, dtype=float),
                                    np.linspace(0.0, max(float(threshold) * 1.5, 1.0), 60)]))
    reg = [attenuation_regret(trajectory, g) for g in gam]
    fig, ax = plt.subplots(figsize=(7, 4.5), dpi=120)
    ax.plot(gam, reg)
    ax.axvline(threshold, color="crimson", ls="--", lw=1.0, label="attenuation threshold")
    ax.set_xlabel(r"attenuation level $\gamma$")
    ax.set_ylabel(r"regret $(\,\sum c_t - \gamma \sum \|w_t\|^2)_+$")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def save_sweep_figure(rows: list[dict], param: str, value_key: str, path) -> None:
    plt = _plt()
    pts = [(r[param], r[value_key]) for r in rows
           if r.get("status") == "ok" and r.get(value_key) not in (None, "")]
    fig, ax = plt.subplots(figsize=(7, 4.5), dpi=120)
    if pts:
        xs, ys = zip(*sorted(pts, key=lambda p: p[0]))
        ax.plot(xs, ys, marker="o")
    ax.set_xlabel(param)
    ax.set_ylabel(value_key)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
