import json
import math

import numpy as np
import pytest

from maxinfo import cli, report
from maxinfo import selection as se
from maxinfo.config import ConfigError, parse_config


def write(tmp_path, text, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_minimal_config_defaults(tmp_path):
    cfg = parse_config(write(tmp_path, "n: 2\nseed: 1\n"))
    assert cfg.model.n == 2 and cfg.run.seed == 1
    assert cfg.tolerances.tie_tol == 1e-10
    assert cfg.tolerances.genericity_tol == 1e-6
    model = cfg.spin_config()
    assert model.n == 2
    again = parse_config(write(tmp_path, "n: 2\nseed: 1\n", "b.yaml")).spin_config()
    np.testing.assert_array_equal(model.v, again.v)


def test_explicit_vectors_verbatim(tmp_path):
    text = "model:\n  n: 2\n  v: [0, 0, 1]\n  u: [[1, 0, 0], [0, 0.6, 0.8]]\n"
    model = parse_config(write(tmp_path, text)).spin_config()
    np.testing.assert_array_equal(model.u[1], [0, 0.6, 0.8])


def test_short_vector_names_index(tmp_path):
    text = "model:\n  n: 2\n  v: [0, 0, 1]\n  u: [[1, 0, 0], [0, 0.5, 0]]\n"
    with pytest.raises(ConfigError, match=r"u\[2\]"):
        parse_config(write(tmp_path, text))


def test_slightly_off_vector_warns(tmp_path):
    text = "model:\n  n: 1\n  v: [0, 0, 1.00001]\n  u: [[1, 0, 0]]\n"
    with pytest.warns(UserWarning, match="renormalized"):
        model = parse_config(write(tmp_path, text)).spin_config()
    assert abs(np.linalg.norm(model.v) - 1) < 1e-15


@pytest.mark.parametrize(
    "text,match",
    [
        ("n: 0\n", "out of range"),
        ("seed: 3\n", "required"),
        ("n: 2\ntolerances:\n  tie_tol: -1\n", "positive"),
        ("n: 2\nbogus: 1\n", "unknown"),
        ("n: [1, 2\n", "malformed"),
    ],
)
def test_bad_configs(tmp_path, text, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(write(tmp_path, text))


def test_usage_errors_exit_one(capsys):
    assert cli.main(["select"]) == cli.EXIT_USAGE
    assert cli.main(["nonsense"]) == cli.EXIT_USAGE
    assert cli.main(["select", "-n", "0"]) == cli.EXIT_USAGE
    err = capsys.readouterr().err.strip().splitlines()
    assert all(line.startswith("maxinfo: ") for line in err)


def test_degenerate_exit_three(tmp_path, capsys):
    text = "model:\n  n: 2\n  v: [0, 0, 1]\n  u: [[0.6, 0, 0.8], [0.8, 0, -0.6]]\n"
    code = cli.main(["classify", "--config", str(write(tmp_path, text)), "--grid", "3"])
    assert code == cli.EXIT_DEGENERATE
    assert capsys.readouterr().err.startswith("maxinfo: degenerate:")


def test_select_epsilon_regime(tmp_path):
    model = se.epsilon_regime_config(3, 2, 1e-3)
    text = "model:\n  n: 3\n  v: %s\n  u: %s\n" % (
        json.dumps(model.v.tolist()),
        json.dumps([u.tolist() for u in model.u]),
    )
    out = tmp_path / "sel.csv"
    assert cli.main(["select", "--config", str(write(tmp_path, text)), "-o", str(out)]) == 0
    table = report.read_csv(out)
    assert table.meta["chosen_k"] == 2
    assert [row[0] for row in table.rows if row[3]] == [2]


def test_classify_round_trip(tmp_path):
    out = tmp_path / "pairs.csv"
    assert cli.main(["classify", "-n", "2", "--seed", "4", "--grid", "5", "-o", str(out)]) == 0
    table = report.read_csv(out)
    assert table.columns[:5] == ["t", "s", "case_tag", "offdiag_abs", "consistent"]
    # rebuild the same table in memory and compare exactly
    cfg = parse_config(None, {"model.n": 2, "model.seed": 4})
    from maxinfo import spinmodel as sm

    rep = sm.classify_pairs(cfg.spin_config(), 5, 1e-9)
    assert len(rep.rows) == len(table.rows)
    for r, row in zip(rep.rows, table.rows):
        assert [r.t, r.s, r.case_tag, r.offdiag_abs, r.consistent, r.allowed] == row
    # the echoed header is enough to rerun
    assert table.meta["config"]["model"]["seed"] == 4


def test_montecarlo_output(tmp_path):
    out = tmp_path / "mc.jsonl"
    args = ["montecarlo", "-n", "3", "--samples", "3000", "--seed", "9", "--format", "jsonl", "-o", str(out)]
    assert cli.main(args) == 0
    lines = out.read_text().splitlines()
    records = [json.loads(line) for line in lines]
    assert "meta" in records[0]
    assert sum(r["count"] for r in records[1:]) == 3000
    first = out.read_text()
    assert cli.main(args) == 0
    assert out.read_text() == first


def test_evolve_and_dmatrix(tmp_path, capsys):
    assert cli.main(["evolve", "-n", "2", "-t", "1.3"]) == 0
    table = report.parse_csv(capsys.readouterr().out)
    amps = np.array([r[1] + 1j * r[2] for r in table.rows])
    assert abs(np.linalg.norm(amps) - 1) < 1e-12
    assert cli.main(["dmatrix", "-n", "2", "--times", "1,1.5,2"]) == 0
    table = report.parse_csv(capsys.readouterr().out)
    assert table.meta["consistent"] is True
    assert len(table.rows) == 64
    assert cli.main(["dmatrix", "-n", "2"]) == cli.EXIT_USAGE


def test_schmidt_and_compare_il(capsys):
    assert cli.main(["schmidt", "-n", "2", "--grid", "3"]) == 0
    table = report.parse_csv(capsys.readouterr().out)
    for t, wp, wm, nv, *_ in table.rows:
        assert wp == pytest.approx(0.5 * (1 + nv), abs=1e-12)
    assert cli.main(["compare-il", "-n", "2", "--grid", "4"]) == 0
    table = report.parse_csv(capsys.readouterr().out)
    assert table.meta["m"] == 3


def test_csv_number_format():
    table = report.Table(["x", "flag", "z_re", "z_im"], [[math.pi, True, 0.1, -1e-300]])
    back = report.parse_csv(report.to_csv(table))
    assert back.rows == [[math.pi, True, 0.1, -1e-300]]
    assert "3.1415926535897931" in report.to_csv(table)


def test_verify_passes(capsys):
    assert cli.main(["verify", "-n", "2"]) == 0
    assert "passed" in capsys.readouterr().err
