"""Figure rendering for traces and reports (non-interactive, files only)."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def render_trace_figure(trace, path):
    """States, inputs and performance output of a run, stacked panels."""
    fig, axes = plt.subplots(3, 1, figsize=(8, 9), sharex=True)
    for k, e in enumerate(trace.elements):
        axes[0].plot(trace.t, trace.x[:, k], label=f"x[{e}]")
        axes[1].plot(trace.t, trace.u[:, k], label=f"u[{e}]")
    for k in range(trace.z.shape[1]):
        axes[2].plot(trace.t, trace.z[:, k], lw=0.8)
    axes[0].set_ylabel("states")
    axes[1].set_ylabel("inputs")
    axes[2].set_ylabel("performance output")
    axes[2].set_xlabel("t")
    for ax in axes[:2]:
        ax.legend(loc="best", fontsize=8, ncol=2)
    for ax in axes:
        ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_reconstruction_figure(trace, path):
    """Disturbances and per-step reconstruction error of a discrete run."""
    fig, axes = plt.subplots(2, 1, figsize=(8, 6), sharex=True)
    for k, e in enumerate(trace.elements):
        axes[0].step(trace.t, trace.w[:, k], where="post", label=f"w[{e}]", lw=0.8)
    # the estimate at step t targets the disturbance injected at step t-1
    err = np.abs(trace.what[1:] - trace.w[:-1]).max(axis=1)
    axes[1].semilogy(trace.t[1:], np.maximum(err, 1e-18), ".-", ms=3)
    axes[0].set_ylabel("disturbance")
    axes[0].legend(loc="best", fontsize=8, ncol=2)
    axes[1].set_ylabel("max reconstruction error")
    axes[1].set_xlabel("t")
    for ax in axes:
        ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
