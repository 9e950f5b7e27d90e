import hashlib
import json
import subprocess
import sys
from pathlib import Path

import pytest

from cellgraph.cli import main
from cellgraph.records import FLOW_HEADER


def digests(d: Path) -> dict[str, str]:
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(d.iterdir()) if p.name != "manifest.json"}


@pytest.fixture(scope="module")
def city(tmp_path_factory):
    d = tmp_path_factory.mktemp("city")
    assert main(["synth-city", "--seed", "7", "--cells-per-scenario", "5", "--days", "2",
                 "--out", str(d), "--threads", "1"]) == 0
    return d


def test_synth_city_outputs_and_manifest(city):
    assert {p.name for p in city.iterdir()} == {"flows.csv", "cells.csv", "truth.csv", "manifest.json"}
    doc = json.loads((city / "manifest.json").read_text())
    assert doc["command"][:2] == ["cellgraph", "synth-city"]
    assert doc["outputs"] == digests(city)
    assert doc["config"]["seed"] == 7 and len(doc["config_digest"]) == 64


def test_synth_city_twice_identical(city, tmp_path):
    assert main(["synth-city", "--seed", "7", "--cells-per-scenario", "5", "--days", "2",
                 "--out", str(tmp_path)]) == 0
    assert digests(tmp_path) == digests(city)


def test_bssn_contract(city, tmp_path, capsys):
    rc = main(["bssn", "--flows", str(city / "flows.csv"), "--cells", str(city / "cells.csv"),
               "--bin", "3600", "--out", str(tmp_path)])
    assert rc == 0
    assert {"graph.graphml", "partition.csv", "manifest.json"} <= {p.name for p in tmp_path.iterdir()}
    assert "communities=4" in capsys.readouterr().out
    doc = json.loads((tmp_path / "manifest.json").read_text())
    assert set(doc["inputs"]) == {str(city / "flows.csv"), str(city / "cells.csv")}
    assert doc["config"]["bin_width"] == 3600


def test_stats_concentration_prints_share(tmp_path, capsys):
    totals = tmp_path / "t.csv"
    totals.write_text("entity_id,total\n" + "".join(f"e{i},10\n" for i in range(5)))
    assert main(["stats", "concentration", "--totals", str(totals), "--p", "0.2"]) == 0
    assert float(capsys.readouterr().out) == pytest.approx(0.2, abs=1e-9)


def test_stage_by_stage_pipeline(city, tmp_path, capsys):
    s, m, g, c, e = (tmp_path / x for x in "smgce")
    assert main(["aggregate", "--flows", str(city / "flows.csv"), "--bin", "3600", "--out", str(s)]) == 0
    assert main(["stats", "acf", "--series", str(s / "series.csv"), "--entity", "cell0000",
                 "--max-lag", "24"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "lag,r" and lines[1] == "0,1.0" and len(lines) == 26
    assert main(["stats", "xcf", "--series", str(s / "series.csv"), "--a", "cell0000", "--b", "cell0001",
                 "--out", str(s)]) == 0
    assert (s / "xcf.csv").exists()
    assert main(["correlate", "--series", str(s / "series.csv"), "--out", str(m)]) == 0
    assert main(["pmfg", "--matrix", str(m / "matrix.csv"), "--out", str(g)]) == 0
    assert main(["communities", "--graph", str(g / "graph.json"), "--series", str(s / "series.csv"),
                 "--out", str(c)]) == 0
    rows = (c / "partition.csv").read_text().splitlines()
    assert rows[0] == "node_id,community_id,scenario_label" and len(rows) == 21
    assert all(r.split(",")[2] for r in rows[1:])
    assert main(["export", "--graph", str(c / "graph.json"), "--partition", str(c / "partition.csv"),
                 "--format", "dot", "--out", str(e)]) == 0
    assert (e / "graph.dot").read_text().startswith("graph G {")


def test_usn_and_asn(tmp_path):
    calls = tmp_path / "calls"
    assert main(["synth-calls", "--seed", "3", "--out", str(calls)]) == 0
    assert main(["usn", "--calls", str(calls / "calls.csv"), "--format", "json", "--out", str(tmp_path / "u")]) == 0
    assert (tmp_path / "u" / "graph.json").exists()
    flows = tmp_path / "apps.csv"
    rows = [FLOW_HEADER]
    for h in range(48):
        t = 1_700_006_400 + 3600 * h
        for k, app in enumerate(("video", "im", "web", "maps")):
            rows.append(f"u1,c1,{t},{t + 3600},0,{(h * (k + 3)) % 17 + 1},0,1,{app},")
    flows.write_text("\n".join(rows) + "\n")
    assert main(["asn", "--flows", str(flows), "--out", str(tmp_path / "a")]) == 0


def test_config_file_and_flag_override(city, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"bin_width": 7200, "seed": 3}))
    out = tmp_path / "o"
    assert main(["bssn", "--flows", str(city / "flows.csv"), "--cells", str(city / "cells.csv"),
                 "--config", str(cfg), "--seed", "5", "--out", str(out)]) == 0
    doc = json.loads((out / "manifest.json").read_text())
    assert doc["config"]["bin_width"] == 7200 and doc["config"]["seed"] == 5


@pytest.mark.parametrize("argv", [
    [],
    ["nonsense"],
    ["bssn", "--flows", "x.csv"],
    ["aggregate", "--flows", "f.csv", "--bogus"],
    ["aggregate", "--flows", "f.csv", "--bin", "abc"],
    ["stats"],
    ["synth-subs", "--threads", "0"],
    ["synth-subs"],  # writes files, so --out is required
])
def test_usage_errors_exit_1(argv, capsys):
    assert main(argv) == 1
    assert capsys.readouterr().err


def test_data_errors_exit_2(tmp_path, city, capsys):
    bad_header = tmp_path / "bad.csv"
    bad_header.write_text("user,cell\n1,2\n")
    bad_json = tmp_path / "cfg.json"
    bad_json.write_text("{not json")
    unknown_key = tmp_path / "cfg2.json"
    unknown_key.write_text('{"colour": 1}')
    out = str(tmp_path / "o")
    cases = [
        ["aggregate", "--flows", str(tmp_path / "missing.csv"), "--out", out],
        ["aggregate", "--flows", str(bad_header), "--out", out],
        ["correlate", "--series", str(bad_header), "--out", out],
        ["pmfg", "--matrix", str(bad_header), "--out", out],
        ["communities", "--graph", str(bad_header), "--out", out],
        ["bssn", "--flows", str(city / "flows.csv"), "--cells", str(city / "cells.csv"),
         "--config", str(bad_json), "--out", out],
        ["bssn", "--flows", str(city / "flows.csv"), "--cells", str(city / "cells.csv"),
         "--config", str(unknown_key), "--out", out],
        ["bssn", "--flows", str(city / "flows.csv"), "--cells", str(city / "cells.csv"),
         "--bin", "-5", "--out", out],
        ["synth-subs", "--alpha", "-1", "--out", out],
        ["stats", "acf", "--series", str(bad_header), "--entity", "x"],
    ]
    for argv in cases:
        assert main(argv) == 2, argv
        assert "error" in capsys.readouterr().err


def test_inputs_not_mutated(city, tmp_path):
    before = digests(city)
    main(["bssn", "--flows", str(city / "flows.csv"), "--cells", str(city / "cells.csv"), "--out", str(tmp_path)])
    main(["aggregate", "--flows", str(city / "flows.csv"), "--out", str(tmp_path / "s")])
    assert digests(city) == before


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "cellgraph", "synth-subs", "--n", "10", "--out", str(tmp_path)],
                          capture_output=True, text=True, env={"CELLGRAPH_LOG": "DEBUG", "PATH": ""})
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "totals.csv").read_text().startswith("entity_id,total\n")
    bad = subprocess.run([sys.executable, "-m", "cellgraph", "--nope"], capture_output=True, text=True)
    assert bad.returncode == 1 and "usage" in bad.stderr
