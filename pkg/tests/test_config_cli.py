import hashlib
import json
import re
from pathlib import Path

import pytest

import fracairy
from fracairy.cli import main
from fracairy.config import ConfigError, load_config, validate_config

SCENARIOS = Path(fracairy.__file__).parent / "scenarios"

SMALL_CAUCHY = """\
problem: cauchy
alpha: 0.5
graph: {k: 1, m: 1, a: [1, 1], B: [2.0]}
grids: {t_end: 0.25, n_steps: 8, n_x: 41, radius: 6}
data:
  u0: [{bump: {support: [-4, -1]}}, zero]
  f: [zero, zero]
"""


def write(tmp_path, text, name="s.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def errors_of(text):
    out = validate_config(text)
    assert isinstance(out, list), "expected validation errors"
    return out


def test_reference_scenarios_load():
    for name in ("cauchy-ref.yaml", "ibvp-ref.yaml"):
        cfg = load_config(SCENARIOS / name)
        assert cfg.alpha == 0.5
        assert len(cfg.x_grids()) == 2


def test_missing_alpha_names_field_and_line():
    errs = errors_of(SMALL_CAUCHY.replace("alpha: 0.5\n", ""))
    assert any(re.match(r"line \d+: alpha: missing required field", e) for e in errs)


def test_alpha_out_of_range():
    errs = errors_of(SMALL_CAUCHY.replace("alpha: 0.5", "alpha: 1.2"))
    assert errs == ["line 2: alpha: alpha = 1.2 out of range, (0,1) required"]


def test_B_shape_mismatch():
    errs = errors_of(SMALL_CAUCHY.replace("B: [2.0]", "B: [2.0, 1.0]"))
    assert any("graph.B: B must be m x k = 1 x 1" in e for e in errs)


def test_lengths_follow_the_problem_kind():
    errs = errors_of(SMALL_CAUCHY.replace("B: [2.0]}", "B: [2.0], lengths: [-1, 1]}"))
    assert any("semi-infinite" in e for e in errs)
    ibvp = SMALL_CAUCHY.replace("problem: cauchy", "problem: ibvp").replace(", radius: 6", "")
    assert any("ibvp needs bond lengths" in e for e in errors_of(ibvp))


def test_unknown_keys_and_bad_values():
    errs = errors_of(SMALL_CAUCHY + "colour: blue\n")
    assert any("colour: unknown field" in e for e in errs)
    errs = errors_of(SMALL_CAUCHY.replace("n_steps: 8", "n_steps: 2"))
    assert any("grids.n_steps" in e for e in errs)
    errs = errors_of(SMALL_CAUCHY.replace("u0: [{bump: {support: [-4, -1]}}, zero]", "u0: [{spike: 1}, zero]"))
    assert any("data.u0" in e for e in errs)


def test_load_config_raises(tmp_path):
    with pytest.raises(ConfigError) as exc:
        load_config(write(tmp_path, SMALL_CAUCHY.replace("alpha: 0.5", "alpha: -1")))
    assert exc.value.errors == ["line 2: alpha: alpha = -1.0 out of range, (0,1) required"]


def test_default_radius_covers_the_data():
    cfg = validate_config(SMALL_CAUCHY.replace(", radius: 6", ""))
    assert cfg.radius == pytest.approx(20.0)


def test_validate_exit_codes(tmp_path, capsys):
    assert main(["validate", str(write(tmp_path, SMALL_CAUCHY))]) == 0
    assert main(["validate", str(write(tmp_path, SMALL_CAUCHY.replace("alpha: 0.5", "alpha: 2")))]) == 1
    # B^T B - I < 0 is fine for ibvp but violates the Cauchy hypothesis
    assert main(["validate", str(write(tmp_path, SMALL_CAUCHY.replace("B: [2.0]", "B: [0.5]")))]) == 2
    err = capsys.readouterr().err
    assert "positive definite" in err
    assert main(["validate", str(tmp_path / "missing.yaml")]) == 1


def test_incompatible_data_exit_code_follows_severity(tmp_path):
    text = SMALL_CAUCHY.replace("support: [-4, -1]", "support: [-1, 1]")
    assert main(["validate", str(write(tmp_path, text))]) == 0
    strict = text + "tolerances: {compat_severity: error}\n"
    assert main(["validate", str(write(tmp_path, strict))]) == 2


def test_solver_failure_exit_code(tmp_path):
    text = SMALL_CAUCHY + "tolerances: {cond_limit: 1.0}\n"
    assert main(["run", str(write(tmp_path, text)), "--out-dir", str(tmp_path / "o")]) == 3


def test_run_writes_artifacts(tmp_path):
    out = tmp_path / "out"
    assert main(["run", str(write(tmp_path, SMALL_CAUCHY)), "--out-dir", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert set(summary) == {"checks", "config", "config_sha256", "convergence", "determinant",
                            "report", "validation", "version"}
    assert summary["determinant"]["det_equilibrated"] == pytest.approx(3**0.5, rel=1e-12)
    lines = (out / "field.csv").read_text().splitlines()
    assert lines[0].startswith("# fracairy ") and summary["config_sha256"] in lines[0]
    assert lines[1] == "bond_id,x,t,u"
    # 41 x points and 9 time nodes per bond
    assert len(lines) == 2 + 2 * 41 * 9
    assert (out / "timings.json").exists()


def test_run_is_byte_reproducible(tmp_path):
    cfg = write(tmp_path, SMALL_CAUCHY)
    for d in ("a", "b"):
        assert main(["run", str(cfg), "--out-dir", str(tmp_path / d)]) == 0
    for name in ("field.csv", "summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_sweep(capsys):
    assert main(["sweep", "--seed", "3", "--count", "20"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["count"] == 20 and out["min_abs_det_equilibrated"] > 1e-8


def test_levels_argument_is_checked():
    with pytest.raises(SystemExit):
        main(["run", "x.yaml", "--levels", "0,1"])
    with pytest.raises(SystemExit):
        main(["run", "x.yaml", "--levels", "2,1,0"])


def test_plot(tmp_path):
    pytest.importorskip("matplotlib")
    out = tmp_path / "out"
    main(["run", str(write(tmp_path, SMALL_CAUCHY)), "--out-dir", str(out)])
    assert main(["plot", str(out / "field.csv"), "--out", str(tmp_path / "f.png")]) == 0
    assert (tmp_path / "f.png").stat().st_size > 0


def test_zero_data_run_writes_zeros(tmp_path):
    text = SMALL_CAUCHY.replace("{bump: {support: [-4, -1]}}", "zero")
    out = tmp_path / "out"
    assert main(["run", str(write(tmp_path, text)), "--out-dir", str(out)]) == 0
    rows = (out / "field.csv").read_text().splitlines()[2:]
    assert all(float(r.rsplit(",", 1)[1]) == 0.0 for r in rows)
    rep = json.loads((out / "summary.json").read_text())["report"]
    assert max(rep["vertex_residuals"].values()) == 0.0 and rep["pde_residual_max"] == 0.0


# frozen after the first validated run of the ibvp reference scenario
IBVP_REF_SHA256 = {
    "field.csv": "e9dfc96f86dc15237e56ee7a0bf13cd0d5a1b1edf29fa54b170a05b59e74fd59",
    "summary.json": "844bb6a25507f5f9ffbe43fc06dcb9af5016e801c0dee1a3865ca4068160f40b",
}


def test_ibvp_reference_checksums(tmp_path):
    out = tmp_path / "out"
    assert main(["run", str(SCENARIOS / "ibvp-ref.yaml"), "--out-dir", str(out)]) == 0
    for name, digest in IBVP_REF_SHA256.items():
        assert hashlib.sha256((out / name).read_bytes()).hexdigest() == digest, name
