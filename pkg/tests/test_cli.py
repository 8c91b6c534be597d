import json

import pytest

from src.cli.commands import EXIT_ERROR, EXIT_OK, EXIT_UNSOUND, run
from src.cli.files import dumps_problem, parse_problem, problem_hash

E1 = {
    "Lambda": [[1.0, 0.0]],
    "Q": [[1.0, 0.0], [0.0, 1.0]],
    "R": [[1.0, 0.0], [0.0, 1.0]],
    "S": [[1.0, 0.0], [0.0, 2.0]],
}

L1_SINGLE = {
    "scenario": "l1",
    "Lambda": [[1.0, 0.0]],
    "Q": [[1.0, 0.0], [0.0, 1.0]],
    "R": [[1.0, 0.0], [0.0, 1.0]],
    "epsilon": 1.0,
    "eta": 0.5,
}


def _write(tmp_path, name, data):
    path = tmp_path / name
    path.write_text(data if isinstance(data, str) else json.dumps(data), encoding="utf-8")
    return str(path)


def _radius(tmp_path, data, name="cert.json", *extra):
    problem = _write(tmp_path, "problem.json", data)
    out = str(tmp_path / name)
    code = run(["radius", problem, "--json-out", out, *extra])
    return code, problem, out


def test_radius_e1(tmp_path):
    code, _, out = _radius(tmp_path, E1)
    assert code == EXIT_OK
    cert = json.loads(open(out, encoding="utf-8").read())
    assert cert["tool"] == "orecover"
    assert cert["radius_sq"] == pytest.approx(0.25, abs=1e-9)
    assert cert["D"][0][0] == pytest.approx(1.0, abs=1e-9)
    assert cert["input_hash"] == problem_hash(parse_problem(json.dumps(E1)))


def test_radius_is_byte_identical(tmp_path):
    _, problem, first = _radius(tmp_path, E1, "a.json")
    second = str(tmp_path / "b.json")
    assert run(["radius", problem, "--json-out", second]) == EXIT_OK
    assert open(first, "rb").read() == open(second, "rb").read()


def test_radius_to_stdout(tmp_path, capsys):
    problem = _write(tmp_path, "problem.json", E1)
    assert run(["radius", problem]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["scenario"] == "exact"


def test_radius_with_check(tmp_path):
    code, _, out = _radius(tmp_path, E1, "cert.json", "--check", "--budget", "2000")
    assert code == EXIT_OK
    oracle = json.loads(open(out, encoding="utf-8").read())["oracle"]
    assert oracle["value"] == pytest.approx(0.25, rel=1e-3)
    assert oracle["seed"] == 42


def test_apply(tmp_path, capsys):
    _, _, cert = _radius(tmp_path, E1)
    capsys.readouterr()
    assert run(["apply", cert, "3"]) == EXIT_OK
    result = json.loads(capsys.readouterr().out)
    assert result["f_hat"] == pytest.approx([3.0, 0.0], abs=1e-9)


def test_apply_wrong_length(tmp_path, caplog):
    _, _, cert = _radius(tmp_path, E1)
    assert run(["apply", cert, "1", "2"]) == EXIT_ERROR
    assert "InputError" in caplog.text


def test_oracle_agrees(tmp_path):
    _, problem, cert = _radius(tmp_path, E1)
    out = str(tmp_path / "oracle.json")
    assert run(["oracle", problem, cert, "--json-out", out]) == EXIT_OK
    report = json.loads(open(out, encoding="utf-8").read())
    assert report["sound"] is True
    assert 0 <= report["gap"] <= 1e-3


@pytest.mark.parametrize("Q", [[[1.0, 0.0]], [[0.0, 0.0]]])
def test_radius_zero_quantity(tmp_path, Q):
    data = dict(E1, Q=Q)
    code, problem, out = _radius(tmp_path, data)
    assert code == EXIT_OK
    cert = json.loads(open(out, encoding="utf-8").read())
    assert cert["radius_sq"] == 0.0
    assert cert["D"][0][0] == pytest.approx(1.0, abs=1e-12)
    report = str(tmp_path / "oracle.json")
    assert run(["oracle", problem, out, "--json-out", report]) == EXIT_OK
    assert json.loads(open(report, encoding="utf-8").read())["oracle_value"] <= 1e-12


def test_oracle_flags_tampered_certificate(tmp_path, caplog):
    _, problem, cert = _radius(tmp_path, E1)
    data = json.loads(open(cert, encoding="utf-8").read())
    data["radius_sq"] /= 2
    tampered = _write(tmp_path, "tampered.json", data)
    assert run(["oracle", problem, tampered, "--json-out", str(tmp_path / "o.json")]) == EXIT_UNSOUND
    assert "exceeds certificate" in caplog.text


def test_oracle_hash_mismatch(tmp_path, caplog):
    _, _, cert = _radius(tmp_path, E1)
    other = _write(tmp_path, "other.json", {**E1, "Q": [[2.0, 0.0], [0.0, 1.0]]})
    assert run(["oracle", other, cert]) == EXIT_ERROR
    assert "HashMismatch" in caplog.text


def test_rank_deficient_observation(tmp_path, caplog):
    data = {**E1, "Lambda": [[1.0, 0.0], [2.0, 0.0]]}
    code, _, _ = _radius(tmp_path, data)
    assert code == EXIT_ERROR
    assert "RankDeficient" in caplog.text


@pytest.mark.parametrize("text", ["{", json.dumps({"Lambda": [[1.0, 0.0]], "Q": [[1.0, 0.0]]})])
def test_bad_problem_file(tmp_path, caplog, text):
    problem = _write(tmp_path, "bad.json", text)
    assert run(["radius", problem]) == EXIT_ERROR
    assert "ProblemFileError" in caplog.text


def test_missing_problem_file(tmp_path, caplog):
    assert run(["radius", str(tmp_path / "nope.json")]) == EXIT_ERROR
    assert "IoFailure" in caplog.text


def test_l2_scenario(tmp_path):
    data = {**L1_SINGLE, "scenario": "l2"}
    code, _, out = _radius(tmp_path, data)
    assert code == EXIT_OK
    cert = json.loads(open(out, encoding="utf-8").read())
    assert cert["scenario"] == "l2"
    assert cert["radius_sq"] > 0


def test_l1_single_observation(tmp_path):
    code, _, out = _radius(tmp_path, L1_SINGLE)
    assert code == EXIT_OK
    cert = json.loads(open(out, encoding="utf-8").read())
    assert cert["verdict"] == "Holds"
    assert cert["k"] == 0
    assert cert["radius_sq"] == pytest.approx(cert["lower_bound"])


def test_l1_full_table(tmp_path):
    data = {**L1_SINGLE, "Lambda": [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            "Q": [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            "R": [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]}
    code, _, out = _radius(tmp_path, data, "cert.json", "--full-M-table")
    assert code in (0, 2)
    cert = json.loads(open(out, encoding="utf-8").read())
    assert len(cert["M_table"]) == 2
    assert all(v is not None for row in cert["M_table"] for v in row)


def test_export_sdpa(tmp_path):
    problem = _write(tmp_path, "problem.json", L1_SINGLE)
    out = tmp_path / "l1.dat-s"
    assert run(["export-sdpa", problem, str(out)]) == EXIT_OK
    body = [line for line in out.read_text(encoding="utf-8").splitlines() if not line.startswith("*")]
    assert body[:3] == ["7", "2", "5 -7"]


def test_export_sdpa_needs_l1(tmp_path, caplog):
    problem = _write(tmp_path, "problem.json", E1)
    assert run(["export-sdpa", problem, str(tmp_path / "x.dat-s")]) == EXIT_ERROR
    assert "InputError" in caplog.text


def test_minimax(tmp_path):
    problem = _write(tmp_path, "problem.json", L1_SINGLE)
    out = tmp_path / "minimax.json"
    assert run(["minimax", problem, "--iters", "10", "--json-out", str(out)]) == EXIT_OK
    result = json.loads(out.read_text(encoding="utf-8"))
    assert result["converged"] is True
    assert result["value"] == pytest.approx(result["lower_bound"], rel=1e-6)


def test_diagnose_hexagon(tmp_path):
    rows = [[[1.0, 0.0, 0.0]], [[0.5, 0.75 ** 0.5, 0.0]], [[-0.5, 0.75 ** 0.5, 0.0]]]
    identity = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
    data = {"Lambda": [[0.0, 0.0, 1.0]], "Q": identity, "R": identity, "S": identity, "forms": rows}
    problem = _write(tmp_path, "problem.json", data)
    out = tmp_path / "diag.json"
    assert run(["diagnose-n", problem, "--json-out", str(out)]) == EXIT_OK
    report = json.loads(out.read_text(encoding="utf-8"))
    assert report["verdict"] == "NotExact"
    assert report["inf_value"] > 4.0 / 3.0


def test_problem_round_trip():
    problem = parse_problem(json.dumps({**L1_SINGLE, "seed": 7}))
    again = parse_problem(dumps_problem(problem))
    assert again == problem
    assert problem_hash(again) == problem_hash(problem)


def test_problem_shape_errors():
    with pytest.raises(ValueError):
        parse_problem(json.dumps({**E1, "R": [[1.0, 0.0, 0.0]]}))
    with pytest.raises(ValueError):
        parse_problem(json.dumps({**E1, "Lambda": [[1.0, 0.0], [1.0]]}))
