"""Figure rendering for the report-style CLI paths.

Figures are written straight to files with fixed metadata so repeated runs
produce identical bytes.
"""

from __future__ import annotations

from typing import Dict, List, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

_SAVE_KWARGS = dict(dpi=150, metadata={"Software": None})


def save_loglog_fit(xs: Sequence[float], medians: Sequence[float],
                    slope: float, intercept_point: float, out_path: str,
                    x_label: str, y_label: str) -> None:
    """Log-log scatter of per-x medians with the fitted power law."""
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    ax.loglog(xs, medians, "o", label="median")
    x0, y0 = xs[0], intercept_point
    fit = [y0 * (x / x0) ** slope for x in xs]
    ax.loglog(xs, fit, "-", label=f"slope {slope:.3f}")
    ax.set_xlabel(x_label)
    ax.set_ylabel(y_label)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, **_SAVE_KWARGS)
    plt.close(fig)


def save_sweep_medians(groups: Dict[float, List[float]], out_path: str,
                       x_label: str, y_label: str) -> None:
    """Median curve with min/max whiskers across an axis sweep."""
    xs = sorted(groups)
    med = [float(sorted(groups[x])[len(groups[x]) // 2]) for x in xs]
    lo = [min(groups[x]) for x in xs]
    hi = [max(groups[x]) for x in xs]
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    ax.fill_between(xs, lo, hi, alpha=0.2, label="range")
    ax.plot(xs, med, "o-", label="median")
    positive = all(x > 0 for x in xs) and all(v > 0 for v in lo)
    if positive:
        ax.set_xscale("log")
        ax.set_yscale("log")
    ax.set_xlabel(x_label)
    ax.set_ylabel(y_label)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, **_SAVE_KWARGS)
    plt.close(fig)
