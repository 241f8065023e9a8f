import json
from pathlib import Path

import numpy as np
import pytest

from acplots import FIGURE_KINDS, FigureSpec, ParseError, render
from acplots.cli import main as cli_main
from acplots.render import build_figure, separation_model


@pytest.fixture(scope="module")
def artifacts(tmp_path_factory):
    """Fixture artifacts in the documented CSV/JSON formats."""
    root = tmp_path_factory.mktemp("artifacts")
    t = np.linspace(-8, 8, 401)
    h = np.tanh(t / np.sqrt(2))
    dh = (1 - h**2) / np.sqrt(2)
    j = -0.25 * t * dh  # stand-in odd decaying curve
    _write_csv(root / "profile.csv", ["t", "H", "dH", "d2H", "J"],
               zip(t, h, dh, -h * dh * np.sqrt(2), j))

    eps = np.array([0.1, 0.05, 0.025, 0.0125])
    d = separation_model(eps) + 2.1 * eps
    _write_csv(root / "separation.csv", ["epsilon", "D", "model", "excess", "excess_over_eps"],
               zip(eps, d, separation_model(eps), d - separation_model(eps),
                   (d - separation_model(eps)) / eps))

    (root / "spectrum.json").write_text(json.dumps({
        "eigenvalues": [-0.5, -0.01, 0.0, 0.3, 1.2],
        "index": 2, "nullity": 1, "zero_tol": 1e-6,
        "residuals": [1e-12] * 5, "solver": "dense",
    }))
    (root / "spectrum_pair.json").write_text(json.dumps({
        "surface": {"eigenvalues": [-1.3, -0.3, 2.7], "index": 3, "nullity": 0},
        "field": {"eigenvalues": [-0.065, -0.015, 0.13], "index": 3, "nullity": 0},
    }))
    (root / "trace.json").write_text(json.dumps({
        "update_norms": [1e1, 1e0, 1e-2, 1e-4, 1e-7],
        "contraction_factors": [0.1, 0.01, 0.01, 0.001],
        "residual": 3e-9,
    }))
    y = np.linspace(0, 1, 33)
    _write_csv(root / "layers.csv", ["y", "f1", "f2"],
               zip(y, -0.2 + 0.01 * np.sin(2 * np.pi * y), 0.2 + 0.02 * y))
    return root


def _write_csv(path, header, rows):
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([f"{v:.17g}" for v in row])


INPUT_FOR = {
    "profile": "profile.csv",
    "separation": "separation.csv",
    "spectrum": "spectrum.json",
    "trace": "trace.json",
    "layers": "layers.csv",
}


@pytest.mark.parametrize("kind", FIGURE_KINDS)
def test_every_kind_renders(kind, artifacts, tmp_path):
    out = tmp_path / f"{kind}.png"
    spec = FigureSpec(kind=kind, inputs=[str(artifacts / INPUT_FOR[kind])], output=str(out))
    path = render(spec)
    assert Path(path).exists()
    assert Path(path).stat().st_size > 2000


@pytest.mark.parametrize("kind", FIGURE_KINDS)
def test_rendering_is_byte_stable(kind, artifacts, tmp_path):
    a, b = tmp_path / "a.png", tmp_path / "b.png"
    for out in (a, b):
        render(FigureSpec(kind=kind, inputs=[str(artifacts / INPUT_FOR[kind])], output=str(out)))
    assert a.read_bytes() == b.read_bytes()


def test_rendering_does_not_mutate_inputs(artifacts, tmp_path):
    src = artifacts / "separation.csv"
    before = src.read_bytes()
    render(FigureSpec(kind="separation", inputs=[str(src)], output=str(tmp_path / "s.png")))
    assert src.read_bytes() == before


def test_separation_overlays_model(artifacts):
    spec = FigureSpec(kind="separation", inputs=[str(artifacts / "separation.csv")], output="x.png")
    fig, ax = build_figure(spec)
    labels = [line.get_label() for line in ax.get_lines()]
    assert "model" in labels
    model_line = ax.get_lines()[labels.index("model")]
    xs = model_line.get_xdata()
    ys = model_line.get_ydata()
    assert np.allclose(ys, separation_model(xs), rtol=1e-12)
    import matplotlib.pyplot as plt

    plt.close(fig)


def test_spectrum_pair_report(artifacts, tmp_path):
    out = tmp_path / "pair.png"
    render(FigureSpec(kind="spectrum", inputs=[str(artifacts / "spectrum_pair.json")], output=str(out)))
    assert out.exists()


def test_empty_csv_is_parse_error(tmp_path):
    bad = tmp_path / "empty.csv"
    bad.write_text("")
    with pytest.raises(ParseError):
        render(FigureSpec(kind="separation", inputs=[str(bad)], output=str(tmp_path / "x.png")))


def test_malformed_csv_reports_line(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("epsilon,D\n0.1,0.3\n0.05,oops\n")
    with pytest.raises(ParseError) as err:
        render(FigureSpec(kind="separation", inputs=[str(bad)], output=str(tmp_path / "x.png")))
    assert ":3:" in str(err.value)


def test_unknown_kind_rejected(tmp_path):
    with pytest.raises(ValueError):
        FigureSpec(kind="pie", inputs=["x.csv"], output="y.png")


def test_cli_roundtrip(artifacts, tmp_path, capsys):
    out = tmp_path / "cli.png"
    code = cli_main(["separation", "--in", str(artifacts / "separation.csv"), "--out", str(out)])
    assert code == 0
    assert out.exists()


def test_cli_parse_error_exit(tmp_path):
    bad = tmp_path / "empty.csv"
    bad.write_text("")
    code = cli_main(["profile", "--in", str(bad), "--out", str(tmp_path / "x.png")])
    assert code == 2
