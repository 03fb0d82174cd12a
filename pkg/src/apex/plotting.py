"""Coverage curves as CSV and PNG."""

from __future__ import annotations

import csv

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def step_points(curve, total_events: int) -> list[tuple[int, int]]:
    """Covered instructions after each applied event, 0 through ``total_events``."""
    out = []
    covered = 0
    it = iter(sorted(curve))
    nxt = next(it, None)
    for n in range(total_events + 1):
        while nxt is not None and nxt[0] <= n:
            covered = nxt[1]
            nxt = next(it, None)
        out.append((n, covered))
    return out


def write_coverage_csv(path, curves: dict, total_instructions: int) -> None:
    """One row per (series, events applied); ``curves`` maps name -> step points."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["series", "events", "covered_instructions", "coverage"])
        for name in sorted(curves):
            for n, covered in curves[name]:
                ratio = covered / total_instructions if total_instructions else 0.0
                w.writerow([name, n, covered, f"{ratio:.6f}"])


def plot_coverage(path, curves: dict, total_instructions: int, title: str = "") -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    for name in sorted(curves):
        pts = curves[name]
        xs = [n for n, _ in pts]
        ys = [100.0 * c / total_instructions if total_instructions else 0.0 for _, c in pts]
        ax.step(xs, ys, where="post", label=name)
    ax.set_xlabel("events applied")
    ax.set_ylabel("instruction coverage (%)")
    ax.set_ylim(0, 105)
    if title:
        ax.set_title(title)
    ax.legend(loc="lower right")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata={"Software": None})
    plt.close(fig)
