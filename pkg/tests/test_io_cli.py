import json
import struct

import numpy as np
import pytest

from quantcat import __version__
from quantcat.cli import main, validate_config, ConfigError
from quantcat.io import (dumps, read_grid_csv, read_operator, read_state, write_grid_csv,
                         write_operator, write_state)
from quantcat.torus import QuantumTorus, TorusOperator, TorusState


def test_state_roundtrip_and_layout(tmp_path):
    qt = QuantumTorus(3, 1, [0.5, 1.5])
    v = np.array([1 + 2j, -0.5j, 0.25])
    p = write_state(tmp_path / "s.tqst", TorusState(v, qt))
    raw = p.read_bytes()
    assert raw[:4] == b"TQST"
    assert struct.unpack("<II", raw[4:12]) == (1, 3)
    assert struct.unpack("<2d", raw[12:28]) == (0.5, 1.5)
    assert struct.unpack("<2d", raw[28:44]) == (1.0, 2.0)
    back = read_state(p)
    assert np.array_equal(back.coeffs, v) and back.context == qt


def test_operator_roundtrip(tmp_path):
    qt = QuantumTorus(2, 2)
    M = np.arange(16).reshape(4, 4) * (1 - 1j)
    back = read_operator(write_operator(tmp_path / "o.tqop", TorusOperator(M, qt)))
    assert np.array_equal(back.matrix, M)


def test_grid_csv_roundtrip(tmp_path):
    g = np.random.default_rng(0).random((8, 8))
    back, d, N = read_grid_csv(write_grid_csv(tmp_path / "h.csv", g, 1, 4))
    assert (d, N) == (1, 4) and np.array_equal(back, g)
    assert (tmp_path / "h.csv").read_text().splitlines()[0] == "d,N,resolution"


def test_json_float_format():
    s = dumps({"x": 0.1, "z": 1 + 2j, "a": np.arange(2)})
    assert '"x": 0.10000000000000001' in s
    assert json.loads(s)["z"] == {"re": 1.0, "im": 2.0}


def test_validate_config_field_messages():
    with pytest.raises(ConfigError, match="config.K"):
        validate_config({"K": 1})
    with pytest.raises(ConfigError, match="unknown"):
        validate_config({"bogus": 1})
    with pytest.raises(ConfigError, match="config.delta0"):
        validate_config({"delta0": 0.7})


def test_analyze_matrix_golden(tmp_path):
    assert main(["analyze-matrix", "--matrix", "2,1;1,1", "--output", str(tmp_path)]) == 0
    out = json.loads((tmp_path / "analyze-matrix.json").read_text())
    assert out["version"] == __version__
    assert abs(out["result"]["Lambda_0"] - 0.481212) < 1e-6
    assert out["config"]["matrix"] == "2,1;1,1"


def test_analyze_matrix_shear_fails(tmp_path):
    code = main(["analyze-matrix", "--matrix", "1,1;0,1", "--output", str(tmp_path)])
    assert code == 2
    out = json.loads((tmp_path / "analyze-matrix.json").read_text())
    assert out["result"]["quantizable"] is False


def test_bad_config_exit_code(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"quantizer": "nope"}))
    assert main(["measure", "--config", str(cfg), "--output", str(tmp_path)]) == 2


def test_flags_override_config(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"N": [8], "seed": 3}))
    assert main(["eup-check", "--config", str(cfg), "--trials", "4", "--seed", "5",
                 "--output", str(tmp_path)]) == 0
    out = json.loads((tmp_path / "eup-check.json").read_text())
    assert out["config"]["seed"] == 5 and out["config"]["N"] == [8]
    assert out["result"]["min_margin"] >= -1e-8


def test_deterministic_artifacts(tmp_path):
    runs = []
    for _ in range(2):
        assert main(["egorov", "--N", "8", "12", "--output", str(tmp_path)]) == 0
        runs.append((tmp_path / "egorov.json").read_bytes())
    assert runs[0] == runs[1]


@pytest.mark.parametrize("cmd", ["propagator", "eigenstates", "husimi", "measure", "entropy",
                                 "c-bound"])
def test_subcommands_run(tmp_path, cmd):
    assert main([cmd, "--N", "8", "--output", str(tmp_path), "--samples", "8"]) == 0


def test_certify_cli(tmp_path):
    assert main(["certify", "--matrix", "2,1;1,1", "--N", "32", "--K", "2", "--m", "1",
                 "--output", str(tmp_path)]) == 0
    out = json.loads((tmp_path / "certify.json").read_text())
    assert out["result"]["margin"] >= -1e-6
