"""Figure regeneration from golden fixtures: all three kinds render, output
is pixel-identical across consecutive runs, and schema problems fail loudly
with the offending column name."""

from pathlib import Path

import numpy as np
import pytest
from matplotlib import image as mpimg

from trajplots.cli import main as cli_main
from trajplots.render import ColumnError, PlotJob, read_trajectory_csv, render

FIXTURES = Path(__file__).parent / "fixtures"


def jobs_for(tmp_path):
    return [
        PlotJob(
            kind="trajectory-band",
            inputs=(str(FIXTURES / "trajectory_band.csv"),),
            out=str(tmp_path / "band.png"),
            x="x_true_dtp",
            y="x_true_cte",
            band_lo="xbar_lo_cte",
            band_hi="xbar_hi_cte",
            safe_lo=-10.0,
            safe_hi=10.0,
            title="runway",
        ),
        PlotJob(
            kind="heatmap-panel",
            inputs=(str(FIXTURES / "field.csv"),),
            out=str(tmp_path / "field.png"),
            markers=((-4.5, -4.5), (-1.5, -1.5), (1.5, 1.5), (4.5, -4.5)),
        ),
        PlotJob(
            kind="comparison-series",
            inputs=(
                str(FIXTURES / "comparison_run_a.csv"),
                str(FIXTURES / "comparison_run_b.csv"),
            ),
            out=str(tmp_path / "cmp.png"),
            y="x_true_x",
            labels=("worst-case", "fixed margin"),
            safe_lo=-1.0,
            safe_hi=1.0,
            reference="x_ref",
        ),
    ]


def test_all_kinds_render(tmp_path):
    for job in jobs_for(tmp_path):
        out = render(job)
        assert Path(out).exists()
        assert Path(out).stat().st_size > 1000


def test_pixel_determinism(tmp_path):
    for job in jobs_for(tmp_path):
        render(job)
        first = mpimg.imread(job.out).copy()
        render(job)
        second = mpimg.imread(job.out)
        np.testing.assert_array_equal(first, second)


def test_missing_column_names_the_column(tmp_path):
    job = PlotJob(
        kind="trajectory-band",
        inputs=(str(FIXTURES / "trajectory_band.csv"),),
        out=str(tmp_path / "x.png"),
        x="x_true_dtp",
        y="no_such_column",
    )
    with pytest.raises(ColumnError, match="no_such_column"):
        render(job)


def test_field_csv_requires_schema(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b,c\n1,2,3\n")
    job = PlotJob(kind="heatmap-panel", inputs=(str(bad),), out=str(tmp_path / "o.png"))
    with pytest.raises(ColumnError, match="px"):
        render(job)


def test_reader_handles_comment_and_plain_headers(tmp_path):
    plain = tmp_path / "plain.csv"
    plain.write_text("time_s,x\n0,1.5\n1,2.5\n")
    data = read_trajectory_csv(plain)
    np.testing.assert_array_equal(data["x"], [1.5, 2.5])
    data2 = read_trajectory_csv(FIXTURES / "trajectory_band.csv")
    assert "xbar_lo_cte" in data2


def test_cli_smoke(tmp_path):
    rc = cli_main(
        [
            "comparison-series",
            "--in",
            str(FIXTURES / "comparison_run_a.csv"),
            str(FIXTURES / "comparison_run_b.csv"),
            "--y",
            "x_true_x",
            "--labels",
            "a,b",
            "--safe-lo",
            "-1",
            "--safe-hi",
            "1",
            "--out",
            str(tmp_path / "cli.png"),
        ]
    )
    assert rc == 0
    assert (tmp_path / "cli.png").exists()


def test_cli_negative_markers_equals_form(tmp_path):
    rc = cli_main(
        [
            "heatmap-panel",
            "--in",
            str(FIXTURES / "field.csv"),
            "--markers=-4.5,-4.5;1.5,1.5",
            "--out",
            str(tmp_path / "m.png"),
        ]
    )
    assert rc == 0
    assert (tmp_path / "m.png").exists()


def test_cli_schema_error_exit_code(tmp_path):
    rc = cli_main(
        [
            "trajectory-band",
            "--in",
            str(FIXTURES / "trajectory_band.csv"),
            "--y",
            "missing",
            "--x",
            "x_true_dtp",
            "--out",
            str(tmp_path / "x.png"),
        ]
    )
    assert rc == 2
