#!/usr/bin/env python3
"""Render PNGs from a `hetsis run` output directory."""
import argparse
import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd


def variance_plots(out: pathlib.Path):
    for var_file in sorted(out.glob("variance*.csv")):
        suffix = var_file.stem[len("variance"):]
        data = pd.read_csv(var_file)
        fig, ax = plt.subplots(figsize=(7, 4))
        ax.plot(data.t, data["var"], lw=0.8, label="ensemble variance")
        ref = out / f"reference{suffix}.csv"
        if ref.exists():
            r = pd.read_csv(ref)
            ax.plot(r.t, r.fitted, "--", label="best fit")
            ax.plot(r.t, r.alpha_one, ":", label="alpha = 1")
        ax.set_xlabel("t")
        ax.set_ylabel("Var I(t)")
        ax.legend()
        fig.tight_layout()
        fig.savefig(out / f"variance{suffix}.png", dpi=120)
        plt.close(fig)


def table_plot(csv: pathlib.Path, x: str, ys, logy=False):
    data = pd.read_csv(csv)
    fig, axes = plt.subplots(1, len(ys), figsize=(5 * len(ys), 4), squeeze=False)
    for ax, y in zip(axes[0], ys):
        ax.plot(data[x], data[y], "o-")
        ax.set_xlabel(x)
        ax.set_ylabel(y)
        if logy:
            ax.set_yscale("log")
    fig.tight_layout()
    fig.savefig(csv.with_suffix(".png"), dpi=120)
    plt.close(fig)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out", type=pathlib.Path)
    out = parser.parse_args().out

    variance_plots(out)
    if (out / "sweep.csv").exists():
        key = pd.read_csv(out / "sweep.csv").columns[0]
        table_plot(out / "sweep.csv", key, ["alpha", "A"])
    if (out / "normalization.csv").exists():
        table_plot(out / "normalization.csv", "n", ["C"])
    if (out / "mean_path.csv").exists():
        table_plot(out / "mean_path.csv", "t", ["mean_clamped", "mean_free"])
    for lam in sorted(out.glob("lambda_mu_*.csv")):
        table_plot(lam, "t", ["lambda"])
    if (out / "density.csv").exists():
        data = pd.read_csv(out / "density.csv")
        fig, ax = plt.subplots(figsize=(6, 4))
        for col in data.columns[1:]:
            ax.plot(data.w, data[col], label=col[len("f_p_"):])
        ax.set_xlabel("omega")
        ax.set_ylabel("f")
        ax.legend(title="p")
        fig.savefig(out / "density.png", dpi=120)
        plt.close(fig)


if __name__ == "__main__":
    main()
