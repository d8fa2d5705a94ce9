"""Infima-CDF panel: empirical P(inf <= -xi) against the e^{-xi} bound.

Solid curves show the martingale-entropy infima, dashed the total-entropy
(virtual-trace) infima, with one colour per observation time when the
input carries a gamma_t column.  The overlay check verifies that every
plotted martingale point sits at or below the bound within its error bar.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from ._csv import SchemaError, configure_deterministic_output, read_columns, save_figure

SCHEMA = ("xi", "cdf_mar", "cdf_tot", "se_mar", "se_tot", "bound")


def check_overlay(data: dict) -> list[str]:
    """Bound violations: cdf_mar(xi) above e^{-xi} beyond its error bar."""
    bad = []
    above = data["cdf_mar"] > data["bound"] + data["se_mar"]
    for i in np.nonzero(above)[0]:
        bad.append(f"xi={data['xi'][i]:g}: cdf_mar={data['cdf_mar'][i]:.4g} "
                   f"> bound {data['bound'][i]:.4g} + se {data['se_mar'][i]:.2g}")
    return bad


def plot_infima(path: str, out: str, floor: float = 1e-5) -> list[str]:
    """Render the infima figure; returns the list of bound violations."""
    data = read_columns(path, SCHEMA, optional=("gamma_t",))
    configure_deterministic_output()
    import matplotlib.pyplot as plt

    if "gamma_t" in data:
        groups = [(gt, np.nonzero(data["gamma_t"] == gt)[0])
                  for gt in np.unique(data["gamma_t"])]
    else:
        groups = [(None, np.arange(data["xi"].size))]

    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    colors = ["#c82020", "#2060c8", "#20a060", "#7030a0"]
    for i, (gt, idx) in enumerate(groups):
        c = colors[i % len(colors)]
        xi = data["xi"][idx]
        label = rf"$\Gamma t = {gt:g}$" if gt is not None else "inf"
        ax.plot(xi, np.maximum(data["cdf_mar"][idx], floor), color=c,
                linewidth=1.4, label=label)
        ax.errorbar(xi, np.maximum(data["cdf_mar"][idx], floor),
                    yerr=data["se_mar"][idx], color=c, fmt="none",
                    elinewidth=0.7, capsize=0)
        ax.plot(xi, np.maximum(data["cdf_tot"][idx], floor), color=c,
                linewidth=1.2, linestyle="--")
    first = groups[0][1]
    ax.plot(data["xi"][first], data["bound"][first], color="grey",
            linestyle="--", linewidth=1.0, label=r"$e^{-\xi}$")
    ax.set_yscale("log")
    ax.set_ylim(bottom=floor)
    ax.set_xlabel(r"$\xi$")
    ax.set_ylabel(r"$\mathrm{Pr}(\inf \Delta S \leq -\xi)$")
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    save_figure(fig, out)
    plt.close(fig)
    return check_overlay(data)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--in", dest="input", required=True, metavar="CSV")
    parser.add_argument("--out", required=True)
    parser.add_argument("--check", action="store_true",
                        help="exit 3 when a cdf_mar point violates the bound")
    args = parser.parse_args(argv)
    try:
        violations = plot_infima(args.input, args.out)
    except SchemaError as exc:
        print(f"plot_infima: {exc}", file=sys.stderr)
        return 1
    if violations:
        for v in violations:
            print(f"plot_infima: bound violation: {v}", file=sys.stderr)
        if args.check:
            return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
