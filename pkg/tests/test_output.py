import numpy as np
import pytest

from abchain.dynamics import Model, Trajectory, run_model
from abchain.model import BasisLayout
from abchain.observables import SweepResult, trajectory_diff
from abchain.output import (
    OutputError,
    emit_plotdata,
    format_value,
    write_cell_table,
    write_diff_table,
    write_eigen_tables,
)
from abchain.params import ChainParams
from abchain.states import BasisState

pytestmark = pytest.mark.filterwarnings("ignore::abchain.states.TruncationWarning")

META = {"scenario": "unit", "config_sha256": "0" * 64}


def body(path):
    lines = path.read_text().splitlines()
    comments = [ln for ln in lines if ln.startswith("#")]
    rows = [ln for ln in lines if not ln.startswith("#")]
    return comments, rows


def test_empty_trajectory_gives_header_only(tmp_path):
    empty = Trajectory(np.empty(0), np.empty((0, 6)), np.empty(0), np.empty(0), np.empty(0), BasisLayout(2))
    comments, rows = body(emit_plotdata(empty, tmp_path / "e.csv", META))
    assert rows == ["time_ms,series,value"]
    assert comments[0].startswith("# abchain ") and "csv-schema 1" in comments[0]
    assert "# scenario: unit" in comments


def test_sweep_rows(tmp_path):
    phi = np.linspace(-np.pi, np.pi, 101)
    sweep = SweepResult(phi, np.cos(phi), -np.sin(phi))
    _, rows = body(emit_plotdata(sweep, tmp_path / "s.csv"))
    assert rows[0] == "phi_rad,series,value"
    assert len(rows) - 1 == 202
    assert {r.split(",")[1] for r in rows[1:]} == {"n_bar", "derivative"}


def test_trajectory_series_and_determinism(tmp_path):
    t = np.linspace(0, 0.1, 6)
    tr = run_model(ChainParams(n_cells=5, gamma=50.0), Model.EFFECTIVE, BasisState(2, "a"), t)
    p1 = emit_plotdata(tr, tmp_path / "a.csv", META)
    p2 = emit_plotdata(tr, tmp_path / "b.csv", META)
    assert p1.read_bytes() == p2.read_bytes()
    _, rows = body(p1)
    assert len(rows) - 1 == 4 * 6
    assert [r.split(",")[1] for r in rows[1::6]] == ["n_bar", "fluctuation", "entropy", "norm"]
    _, cells = body(write_cell_table(tr, tmp_path / "c.csv"))
    assert cells[0] == "time_ms,p_0,p_1,p_2,p_3,p_4" and len(cells) == 7
    _, diff = body(write_diff_table(trajectory_diff(tr, tr), tmp_path / "d.csv"))
    assert diff[1] == "0,0,0,0,0,0"


def test_eigen_tables(tmp_path):
    lam = np.array([1 + 2j, -3.5 + 0j])
    w = np.array([[0.25, 0.75], [1.0, 0.0]])
    ev, loc = write_eigen_tables(lam, w, tmp_path)
    _, rows = body(ev)
    assert rows == ["eigen_index,re_lambda,im_lambda,mean_cell", "0,1,2,0.75", "1,-3.5,0,0"]
    _, rows = body(loc)
    assert rows[0] == "eigen_index,re_lambda,im_lambda,w_0,w_1"


def test_format_value():
    assert format_value(-0.0) == "0"
    assert format_value(np.int64(3)) == "3"
    assert format_value(1 / 3) == "0.333333333333"
    assert format_value("x") == "x"


def test_unwritable_path_reports_location(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OutputError, match="file"):
        emit_plotdata(SweepResult(np.arange(3.0), np.zeros(3), np.zeros(3)), blocker / "x.csv")
