import json

import numpy as np
import pytest

from defectchains.cli import EXIT_CAP, EXIT_DEGENERATE, EXIT_INPUT, EXIT_OK, main
from defectchains.field import SampledField, make_grid
from defectchains.io import parse_field, write_field


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def vortex_file(tmp_path):
    path = tmp_path / "v.json"
    assert main(["gen", "--preset", "vortex", "--counts", "16", "--out", str(path)]) == EXIT_OK
    return path


def test_gen_writes_a_readable_field(vortex_file):
    u = parse_field(vortex_file)
    assert u.grid.counts == (16, 16) and u.target == "circle"


def test_gen_blob_and_noise(tmp_path):
    path = tmp_path / "n.json"
    assert main(["gen", "--preset", "noise", "--counts", "6,6,6", "--seed", "3", "--blob", "--out", str(path)]) == 0
    assert (tmp_path / "n.bin").exists()
    assert parse_field(path).dim == 3


def test_gen_to_stdout(capsys):
    code, out, _ = run(capsys, "gen", "--preset", "degree-n", "--degree", "2", "--counts", "4")
    assert code == EXIT_OK
    assert json.loads(out)["counts"] == [4, 4]


def test_extract_and_flatnorm(vortex_file, tmp_path, capsys):
    chain = tmp_path / "s.json"
    assert main(["extract", "--field", str(vortex_file), "--y", "0,0", "--out", str(chain)]) == EXIT_OK
    data = json.loads(chain.read_text())
    assert len(data["locations"]) == 1
    code, out, _ = run(capsys, "flatnorm", "--field", str(vortex_file), "--chain", str(chain))
    assert code == EXIT_OK
    res = json.loads(out)
    # a unit point near the center: filling to the boundary costs about its distance 0.98
    assert 0.9 < res["value"] <= 1.0
    code, out, _ = run(capsys, "flatnorm", "--field", str(vortex_file), "--chain", str(chain),
                       "--box=-0.5,-0.5,0.5,0.5")
    # relative to the inner box only the distance to that box counts
    assert code == EXIT_OK and 0.4 < json.loads(out)["value"] < 0.6


@pytest.mark.parametrize("fmt", ["csv", "svg"])
def test_extract_formats(vortex_file, capsys, fmt):
    code, out, _ = run(capsys, "extract", "--field", str(vortex_file), "--format", fmt)
    assert code == EXIT_OK and out


def test_lift(vortex_file, capsys):
    code, out, _ = run(capsys, "lift", "--field", str(vortex_file), "--no-minimize-cut")
    assert code == EXIT_OK
    data = json.loads(out)
    assert len(data["theta"]) == 17 * 17 and data["jumps"]


def test_check_jacobian(vortex_file, capsys):
    code, out, _ = run(capsys, "check-jacobian", "--field", str(vortex_file), "--samples", "50", "--threads", "2")
    assert code == EXIT_OK
    assert json.loads(out)["comparison"] == 1


@pytest.mark.parametrize("kind", ["mass", "stability", "projection"])
def test_reports(vortex_file, capsys, kind):
    code, out, _ = run(capsys, "report", kind, "--field", str(vortex_file), "--samples", "10")
    assert code == EXIT_OK and json.loads(out)


def test_continuity_needs_second_field(vortex_file, capsys):
    code, _, err = run(capsys, "report", "continuity", "--field", str(vortex_file), "--samples", "5")
    assert code == EXIT_INPUT and "field2" in err
    code, out, _ = run(capsys, "report", "continuity", "--field", str(vortex_file), "--field2", str(vortex_file),
                       "--samples", "5")
    assert code == EXIT_OK and json.loads(out)["flat_integral"] == 0.0


def test_input_errors(tmp_path, capsys):
    assert run(capsys, "extract", "--field", str(tmp_path / "missing.json"))[0] == EXIT_INPUT
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"d": 2, "m": 2, "origin": [0, 0], "spacing": [1, 1], "counts": [1, 1],
                               "values": [0.0] * 6}))
    code, _, err = run(capsys, "extract", "--field", str(bad))
    assert code == EXIT_INPUT and "expected 8, found 6" in err
    assert run(capsys, "nonsense")[0] == EXIT_INPUT
    assert run(capsys, "gen")[0] == EXIT_INPUT


def test_degeneracy_exit_code(tmp_path, capsys):
    # a field whose sampled value coincides with y at a vertex is degenerate; with no
    # resampling the CLI cannot recover
    u = SampledField.from_function(make_grid((2, 2)), lambda x: x + 0.1, "circle")
    path = write_field(u, tmp_path / "deg.json")
    y = ",".join(repr(float(v)) for v in u.values[4])
    from defectchains import cli

    original = cli.singular_set

    def no_resample(*a, **kw):
        return original(*a, max_resamples=0, **kw)
    cli.singular_set = no_resample
    try:
        assert run(capsys, "extract", "--field", str(path), "--y", y)[0] == EXIT_DEGENERATE
    finally:
        cli.singular_set = original


def test_flat_norm_cap_exit_code(vortex_file, tmp_path, capsys, monkeypatch):
    chain = tmp_path / "s.json"
    main(["extract", "--field", str(vortex_file), "--out", str(chain)])
    from defectchains import flatnorm
    from defectchains import cli

    def capped(*a, **kw):
        raise flatnorm.FlatNormCapError("cell cap exceeded")
    monkeypatch.setattr(cli, "flat_norm", capped)
    assert run(capsys, "flatnorm", "--field", str(vortex_file), "--chain", str(chain), "--certify")[0] == EXIT_CAP
