"""Running-mean convergence panel for the stopping-time estimator.

One curve per stopping rule (one input CSV per rule) with its bootstrap
confidence band, against the horizontal guide at 1.
"""

from __future__ import annotations

import argparse
import os
import sys

from ._csv import SchemaError, configure_deterministic_output, read_columns, save_figure

SCHEMA = ("n", "mean", "ci_lo", "ci_hi")


def plot_convergence(inputs: list[str], out: str,
                     labels: list[str] | None = None) -> None:
    """Render the convergence figure; raises SchemaError on bad input."""
    datasets = [read_columns(p, SCHEMA) for p in inputs]
    if labels is None:
        labels = [os.path.splitext(os.path.basename(p))[0] for p in inputs]
    configure_deterministic_output()
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    colors = ["#222222", "#a0522d", "#c82020", "#2060c8", "#20a060"]
    for i, (data, label) in enumerate(zip(datasets, labels)):
        c = colors[i % len(colors)]
        ax.fill_between(data["n"], data["ci_lo"], data["ci_hi"],
                        color=c, alpha=0.18, linewidth=0)
        ax.plot(data["n"], data["mean"], color=c, label=label, linewidth=1.4)
    ax.axhline(1.0, color="grey", linestyle="--", linewidth=0.9)
    ax.set_xscale("log")
    ax.set_xlabel("number of trajectories")
    ax.set_ylabel(r"$\langle e^{-\Delta S_{\rm mar}(T)} \rangle$")
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    save_figure(fig, out)
    plt.close(fig)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--in", dest="inputs", nargs="+", required=True,
                        metavar="CSV", help="running_mean.csv files, one per rule")
    parser.add_argument("--out", required=True, help="output image (svg/pdf/png)")
    parser.add_argument("--labels", nargs="*", default=None)
    args = parser.parse_args(argv)
    if args.labels is not None and len(args.labels) != len(args.inputs):
        print("plot_convergence: --labels must match --in", file=sys.stderr)
        return 1
    try:
        plot_convergence(args.inputs, args.out, args.labels)
    except SchemaError as exc:
        print(f"plot_convergence: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
