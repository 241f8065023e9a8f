"""Figure construction for the five artifact kinds."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from acplots.readers import ParseError, read_report, read_table

FIGURE_KINDS = ("profile", "separation", "spectrum", "trace", "layers")

_STYLE = {
    "figure.figsize": (6.0, 4.0),
    "figure.dpi": 130,
    "savefig.dpi": 130,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 10,
    "svg.hashsalt": "acplots",
}


@dataclass
class FigureSpec:
    kind: str
    inputs: list
    output: str
    title: str | None = None
    style_seed: int = 0

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}; choose from {FIGURE_KINDS}")
        if isinstance(self.inputs, (str, Path)):
            self.inputs = [self.inputs]
        if not self.inputs:
            raise ValueError("at least one input artifact is required")


def separation_model(eps):
    eps = np.asarray(eps, dtype=float)
    le = np.abs(np.log(eps))
    return np.sqrt(2.0) * eps * le - eps * np.log(le) / np.sqrt(2.0)


def _fig_profile(spec, ax):
    header, cols = read_table(spec.inputs[0])
    t = np.asarray(cols["t"])
    for name, style in (("H", "-"), ("dH", "--"), ("J", "-.")):
        if name in cols:
            ax.plot(t, cols[name], style, label=name)
    ax.set_xlabel("t")
    ax.set_ylabel("profile")
    ax.legend(loc="best")


def _fig_separation(spec, ax):
    header, cols = read_table(spec.inputs[0])
    for need in ("epsilon", "D"):
        if need not in cols:
            raise ParseError(spec.inputs[0], 1, f"separation table needs a {need!r} column")
    eps = np.asarray(cols["epsilon"])
    order = np.argsort(eps)
    eps = eps[order]
    d = np.asarray(cols["D"])[order]
    ax.plot(eps, d, "o-", label="separation")
    fine = np.geomspace(eps.min(), eps.max(), 200)
    ax.plot(fine, separation_model(fine), "--", label="model")
    ax.set_xscale("log")
    ax.set_xlabel("epsilon")
    ax.set_ylabel("gap")
    ax.legend(loc="best")


def _eig_ladder(ax, eigs, x, label):
    for v in eigs:
        ax.hlines(v, x - 0.3, x + 0.3)
    ax.plot([], [], label=label)
    ax.annotate(label, (x, max(eigs)), ha="center", fontsize=8,
                xytext=(0, 6), textcoords="offset points")


def _fig_spectrum(spec, ax):
    for i, path in enumerate(spec.inputs):
        data = read_report(path)
        if "eigenvalues" in data:
            groups = {Path(path).stem: data}
        else:
            groups = {k: v for k, v in data.items() if isinstance(v, dict) and "eigenvalues" in v}
            if not groups:
                raise ParseError(path, 1, "no eigenvalue lists found in report")
        for j, (name, rep) in enumerate(sorted(groups.items())):
            _eig_ladder(ax, rep["eigenvalues"], i + 0.5 * j, name)
    ax.axhline(0.0, color="k", lw=0.8)
    ax.set_ylabel("eigenvalue")
    ax.set_xticks([])


def _fig_trace(spec, ax):
    data = read_report(spec.inputs[0])
    if "update_norms" not in data:
        raise ParseError(spec.inputs[0], 1, "trace report needs 'update_norms'")
    updates = data["update_norms"]
    ax.semilogy(range(1, len(updates) + 1), updates, "o-", label="update norm")
    if data.get("contraction_factors"):
        ax2 = ax.twinx()
        ax2.plot(range(2, len(updates) + 1), data["contraction_factors"], "s--",
                 color="tab:orange", label="contraction factor")
        ax2.set_ylabel("contraction factor")
        ax2.set_ylim(0, max(1.05, max(data["contraction_factors"]) * 1.1))
    if "residual" in data:
        ax.axhline(data["residual"], color="tab:green", lw=0.8, ls=":", label="final residual")
    ax.set_xlabel("iteration")
    ax.set_ylabel("update norm")
    ax.legend(loc="upper right")


def _fig_layers(spec, ax):
    header, cols = read_table(spec.inputs[0])
    if "y" not in cols:
        raise ParseError(spec.inputs[0], 1, "layers table needs a 'y' column")
    y = np.asarray(cols["y"])
    sheets = [h for h in header if h != "y"]
    if not sheets:
        raise ParseError(spec.inputs[0], 1, "layers table has no sheet columns")
    for name in sheets:
        ax.plot(y, cols[name], label=name)
    ax.set_xlabel("y")
    ax.set_ylabel("sheet height")
    ax.legend(loc="best")


_BUILDERS = {
    "profile": _fig_profile,
    "separation": _fig_separation,
    "spectrum": _fig_spectrum,
    "trace": _fig_trace,
    "layers": _fig_layers,
}


def build_figure(spec: FigureSpec):
    """Construct (fig, ax) without writing; render() saves it."""
    rng = np.random.default_rng(spec.style_seed)  # reserved for style jitter; fixed -> stable
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        _BUILDERS[spec.kind](spec, ax)
        if spec.title:
            ax.set_title(spec.title)
        fig.tight_layout()
    return fig, ax


def render(spec: FigureSpec) -> str:
    """Write the figure; deterministic bytes for identical inputs."""
    fig, _ = build_figure(spec)
    out = Path(spec.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    try:
        fig.savefig(out, metadata=_stable_metadata(out.suffix))
    finally:
        plt.close(fig)
    return str(out)


def _stable_metadata(suffix):
    if suffix.lower() == ".png":
        return {"Software": "acplots"}
    if suffix.lower() == ".svg":
        return {"Date": None}
    return None
