import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fidendrite.cli import (
    EXIT_AMBIGUOUS,
    EXIT_NEGATIVE,
    EXIT_OK,
    SpecError,
    bundled_specs,
    load_spec,
    main,
    parse_spec,
    serialize_spec,
    spec_from_dict,
)
from fidendrite.ifs_core import Similarity


def _two_maps(**extra):
    m = [{"r": 0.5, "theta": 0, "reflect": False, "t": [0, 0]},
         {"r": 0.5, "theta": 0, "reflect": False, "t": [0.5, 0]}]
    return {"angle_unit": "degrees", "maps": m, **extra}


def test_bundled_specs():
    assert {"gasket", "vicsek", "rotated_vicsek", "cantor", "segment", "overlap"} <= set(bundled_specs())


def test_gasket_spec_maps():
    system = load_spec("gasket").to_system()
    assert system.m == 3 and all(math.isclose(s.ratio, 0.5) for s in system.maps)
    assert system.maps[2](0) == pytest.approx(0.25 + 1j * math.sqrt(3) / 4)


def test_theta_is_normalized():
    d = _two_maps()
    d["maps"][0]["theta"] = 450
    d["maps"][1]["theta"] = -180
    spec = spec_from_dict(d)
    assert spec.maps[0].theta == 90 and spec.maps[1].theta == 180
    s = spec.to_system()[1]
    assert s.close_to(Similarity(0.5, math.pi / 2), 1e-12)


@pytest.mark.parametrize(
    "mutate, message",
    [
        (lambda d: d["maps"][0].update(r=1.0), "map 1: ratio must be < 1"),
        (lambda d: d["maps"][1].update(r=0), "map 2: ratio must be > 0"),
        (lambda d: d.update(maps=d["maps"][:1]), "a system needs at least 2 maps"),
        (lambda d: d.pop("angle_unit"), "angle_unit"),
        (lambda d: d.update(angle_unit="grad"), "angle_unit"),
        (lambda d: d["maps"][0].update(t=[0]), "t must be"),
        (lambda d: d["maps"][0].update(reflect="yes"), "reflect"),
        (lambda d: d.update(color="red"), "unknown fields"),
        (lambda d: d.update(tolerances={"fi_tol": "small"}), "tolerances.fi_tol"),
        (lambda d: d.update(assertions={"osc_asserted": 1}), "assertions"),
    ],
)
def test_spec_errors(mutate, message):
    d = _two_maps()
    mutate(d)
    with pytest.raises(SpecError, match=message):
        spec_from_dict(d)


def test_invalid_json():
    with pytest.raises(SpecError, match="invalid JSON"):
        parse_spec("{")


_map = st.fixed_dictionaries({
    "r": st.floats(0.01, 0.99),
    "theta": st.floats(-179.0, 180.0),
    "reflect": st.booleans(),
    "t": st.lists(st.floats(-10, 10), min_size=2, max_size=2),
})


@settings(max_examples=100, deadline=None)
@given(maps=st.lists(_map, min_size=2, max_size=6), name=st.text(max_size=8))
def test_spec_roundtrip(maps, name):
    spec = spec_from_dict({"name": name, "angle_unit": "degrees", "maps": maps})
    again = parse_spec(serialize_spec(spec))
    assert again == spec
    assert serialize_spec(again) == serialize_spec(spec)


@pytest.mark.parametrize(
    "name, code",
    [("gasket", EXIT_NEGATIVE), ("vicsek", EXIT_OK), ("cantor", EXIT_AMBIGUOUS),
     ("segment", EXIT_OK), ("overlap", EXIT_AMBIGUOUS), ("rotated_vicsek", EXIT_OK)],
)
def test_dendrite_exit_codes(name, code, capsys):
    assert main(["dendrite", name]) == code
    out = json.loads(capsys.readouterr().out)
    assert out["outcome"] in ("Dendrite", "NotDendrite", "Inconclusive")


def test_fi_exit_codes(capsys):
    assert main(["fi", "gasket"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["verdict"] == "FI_certified"
    assert main(["fi", "overlap"]) == EXIT_NEGATIVE


def test_spec_error_exit_code(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"angle_unit": "degrees", "maps": []}))
    assert main(["fi", str(p)]) == 2
    assert "at least 2 maps" in capsys.readouterr().err
    assert main(["fi", str(tmp_path / "missing.json")]) == 2


def test_vicsek_center_slope(capsys):
    assert main(["slope", "vicsek", "--period", "5"]) == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert out["agree"] and len(out["arcs"]) == 4
    assert all(abs(a["lambda"]) <= 1e-9 for a in out["arcs"])


def test_slope_cluster_index(capsys):
    assert main(["slope", "gasket", "--cluster", "0"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["status"] == "matched"
    assert main(["slope", "gasket", "--cluster", "9"]) == 2


def test_graph_and_dot(tmp_path, capsys):
    dot = tmp_path / "g.dot"
    assert main(["graph", "vicsek", "--level", "2", "--dot", str(dot)]) == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert (out["white"], out["black"], out["edges"]) == (25, 24, 48)
    assert dot.read_text().startswith("graph")
    assert main(["graph", "gasket"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["tree"] == "not_tree"
    assert main(["graph", "overlap"]) == EXIT_NEGATIVE


def test_order_and_zerner(capsys):
    assert main(["order", "gasket", "--point", "0.5,0"]) == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert out["address_count"] == 2 and out["ord_estimate"] == 4
    assert main(["zerner", "cantor", "--a", "1"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["lower_estimate"] is True


def test_render_outputs(tmp_path):
    svg, pbm = tmp_path / "k.svg", tmp_path / "k.pbm"
    assert main(["render", "segment", "--svg", str(svg), "--pbm", str(pbm), "--eps", "0.05",
                 "--json", str(tmp_path / "r.json")]) == EXIT_OK
    assert svg.read_text().startswith("<?xml")
    assert pbm.read_bytes().startswith(b"P4")


def test_report_is_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["report", "segment", "--json", str(a)]) == EXIT_OK
    assert main(["report", "segment", "--json", str(b)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    assert "-0.0" not in a.read_text()


def test_spec_command_normalizes(capsys):
    assert main(["spec", "rotated_vicsek"]) == EXIT_OK
    out = capsys.readouterr().out
    assert parse_spec(out) == load_spec("rotated_vicsek")
