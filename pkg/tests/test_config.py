from __future__ import annotations

import pytest

from tumorpatch.config import load_config, parse_config
from tumorpatch.errors import SchemaError

BASE = """mode = "scheme"

[grid]
n = 32
side = 4.0

[scheme]
tau = 0.01
T = 0.05
"""


def test_defaults_are_filled():
    cfg = parse_config(BASE)
    assert cfg.grid.N == (32, 32) and cfg.grid.dim == 2
    assert cfg.params.tau == 0.01 and cfg.params.b == 0.0 and cfg.params.tol == 1e-6
    assert cfg.initial.shape == "ball" and cfg.initial.radius == 0.5
    assert cfg.n0 == 2.0 and cfg.snapshots == () and cfg.out_dir == "out"
    assert cfg.nutrient().values.max() == 2.0
    assert cfg.initial.build(cfg.grid).mass() > 0


def _err(text):
    with pytest.raises(SchemaError) as info:
        parse_config(text)
    return info.value


def test_growth_step_condition_is_explained():
    e = _err(BASE.replace("T = 0.05", "T = 0.05\nb = 200.0"))
    assert "tau*b" in str(e) and "monotone" in str(e)
    assert e.line == 10


def test_unknown_mode_and_keys_have_line_numbers():
    e = _err(BASE.replace('"scheme"', '"nonsense"'))
    assert e.line == 1 and "unknown mode" in str(e)
    e = _err(BASE.replace("side = 4.0", "sid = 4.0"))
    assert e.line == 5 and "unknown key" in str(e)
    e = _err(BASE + "\n[extra]\nx = 1\n")
    assert e.line == 11
    e = _err(BASE.replace("n = 32", 'n = "32"'))
    assert "expected int" in str(e)


def test_structural_errors():
    assert "at least 8" in str(_err(BASE.replace("n = 32", "n = 4")))
    assert "required" in str(_err(BASE.replace("tau = 0.01\n", "")))
    assert "TOML" in str(_err(BASE + "\n[grid\n"))
    assert "outside" in str(_err(BASE + '\n[output]\nsnapshots = [0.0, 1.0]\n'))
    assert "[compare]" in str(_err(BASE.replace('"scheme"', '"check_contraction"')))
    assert "[hyperplane]" in str(_err(BASE.replace('"scheme"', '"geometry"')))
    assert "b = D = 0" in str(_err(BASE.replace('"scheme"', '"elliptic"').replace("T = 0.05", "T = 0.05\nD = 1.0")))
    assert "blob" in str(_err(BASE.replace("n = 32", "n = 32\ndim = 1") + '\n[initial]\nshape = "blob"\n'))
    assert "unknown shape" in str(_err(BASE + '\n[initial]\nshape = "torus"\n'))
    assert "equally long" in str(_err(BASE + '\n[initial]\nshape = "balls"\ncenters = [[0.0, 0.0]]\nradii = []\n'))


def test_full_document():
    text = BASE.replace('"scheme"', '"geometry"') + """
[initial]
shape = "balls"
centers = [[-0.45, 0.0], [0.45, 0.0]]
radii = [0.4, 0.3]

[hyperplane]
normal = [1.0, 0.0]
side = -1

[output]
snapshots = [0.0, 0.05]
dir = "x"
"""
    cfg = parse_config(text)
    assert cfg.hyperplane == ((1.0, 0.0), 0.0, -1)
    assert cfg.initial.centers == ((-0.45, 0.0), (0.45, 0.0))
    assert cfg.snapshots == (0.0, 0.05) and cfg.out_dir == "x"


def test_load_config_file(tmp_path):
    path = tmp_path / "c.toml"
    path.write_text(BASE)
    assert load_config(path).grid.N == (32, 32)
    path.write_bytes(b"\xff\xfe")
    with pytest.raises(SchemaError):
        load_config(path)


def test_shipped_configs_parse():
    from pathlib import Path

    paths = sorted((Path(__file__).parent.parent / "configs").glob("*.toml"))
    assert paths
    for p in paths:
        cfg = load_config(p)
        assert cfg.out_dir.startswith("out/")
