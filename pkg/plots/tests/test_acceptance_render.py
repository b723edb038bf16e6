"""Acceptance check for the figure renderer: drive the experiment CLI to
produce a real sweep CSV, render it, and verify the grid shape and byte
determinism. Prints one PASS/FAIL summary line."""

from homoenc.cli import main as experiment

from plots.cli import main as render_cli
from plots.render import FigureSpec, build_figure


def report(n, ok, detail):
    print(f"[acceptance] criterion {n}: {'PASS' if ok else 'FAIL'} ({detail})")


def test_criterion_10_sweep_grid_renders_deterministically(tmp_path):
    sweep_dir = tmp_path / "sweep"
    rc = experiment([
        "sweep", "--objectives", "vhe,ns", "--families", "gaussian",
        "--d-sizes", "1,2,5,10", "--classes", "8", "--per-class", "12",
        "--epochs", "4", "--anneal-epochs", "1", "--runs", "1",
        "--k", "10", "--mc-outer", "2", "--episodes-per-class", "2",
        "--held-per-class", "3", "--seed", "0", "--out", str(sweep_dir)])
    assert rc == 0
    csv_path = sweep_dir / "metrics.csv"

    out = tmp_path / "figure.svg"
    assert render_cli(["--csv", str(csv_path), "--out", str(out)]) == 0
    first = out.read_bytes()
    out.unlink()
    assert render_cli(["--csv", str(csv_path), "--out", str(out)]) == 0
    identical = out.read_bytes() == first

    fig = build_figure(FigureSpec(csv=str(csv_path), out=str(out)))
    metric_rows = [ax.get_ylabel() for ax in fig.axes if ax.get_ylabel()]
    lines_per_panel = {len(ax.lines) for ax in fig.axes}
    legend_labels = [t.get_text() for t in fig.legends[0].get_texts()]

    ok = (identical and len(fig.axes) == 4 and len(metric_rows) == 4
          and lines_per_panel == {2} and legend_labels == ["vhe", "ns"])
    report(10, ok, f"{len(metric_rows)} metric rows x 1 family, "
                   f"{sorted(lines_per_panel)} lines/panel for "
                   f"{legend_labels}, rerender identical: {identical}")
    assert len(fig.axes) == 4
    assert len(metric_rows) == 4
    assert lines_per_panel == {2}
    assert legend_labels == ["vhe", "ns"]
    assert identical
