import csv
import io
import json

import pytest

from lkaccel.cli import main, parse_sizes
from lkaccel.netio import (builtin_names, dumps_network, load_builtin, loads_network,
                           network_to_dict)
from lkaccel.errors import SchemaError
from lkaccel.netmodel import AcceleratorConfig
from lkaccel.sched import schedule_network


def rows(path):
    return list(csv.DictReader(io.StringIO(path.read_text())))


def test_sizes_parsing():
    assert parse_sizes("3..7") == [3, 4, 5, 6, 7]
    assert parse_sizes("3,5,31") == [3, 5, 31]


@pytest.mark.parametrize("name", builtin_names())
def test_builtin_round_trip(name):
    net = load_builtin(name)
    again = loads_network(dumps_network(net))
    assert again == net
    cfg = AcceleratorConfig()
    assert schedule_network(net, cfg)[1].to_dict() == schedule_network(again, cfg)[1].to_dict()


def test_builtins_present():
    assert {"mbconv-demo", "pyconv-demo", "replk-demo", "mobilenetv2", "resnet50",
            "replknet31-like", "pyconvresnet50-like"} <= set(builtin_names())


def test_simulate_mbconv(tmp_path):
    out = tmp_path / "sim.csv"
    assert main(["simulate", "--builtin", "mbconv-demo", "--out", str(out), "--dump-trace"]) == 0
    r = rows(out)
    pols = {x["policy"] for x in r}
    assert pols == {"AllBaseline", "FuseWherePossible"}
    total = {p: sum(int(x["dram_bytes_in"]) + int(x["dram_bytes_wt"]) + int(x["dram_bytes_out"])
                    for x in r if x["policy"] == p) for p in pols}
    assert total["FuseWherePossible"] < total["AllBaseline"]
    summary = json.loads(out.with_suffix(".summary.json").read_text())
    assert set(summary["policies"]) == pols
    trace = json.loads(out.with_suffix(".trace.json").read_text())
    assert {"kind", "tile", "start", "end", "buffers"} <= set(trace["AllBaseline"][0])
    assert b"\r\n" not in out.read_bytes()
    zf = out.with_suffix(".zflow.csv").read_text().splitlines()
    assert zf[0] == "layer,cycle,kx,ky,direction,array_index,source_tag,coord"
    assert any(",NeighborReuse," in l for l in zf)


def test_simulate_pyconv_baseline_branch_utilization(tmp_path):
    out = tmp_path / "py.csv"
    assert main(["simulate", "--builtin", "pyconv-demo", "--strategy", "baseline",
                 "--out", str(out)]) == 0
    assert "0.062500" in [x["utilization"] for x in rows(out)]


def test_simulate_is_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        main(["simulate", "--builtin", "replk-demo", "--out", str(p)])
    assert a.read_bytes() == b.read_bytes()
    assert a.with_suffix(".summary.json").read_bytes() == b.with_suffix(".summary.json").read_bytes()


def test_unknown_key_exits_2(tmp_path, capsys):
    net = network_to_dict(load_builtin("mbconv-demo"))
    net["items"][0]["layers"][1]["dilation"] = 2
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(net))
    assert main(["simulate", "--network", str(p)]) == 2
    assert "dilation" in capsys.readouterr().err


def test_malformed_json_exits_2(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text('{"name": "x",\n "items": [}')
    assert main(["simulate", "--network", str(p)]) == 2
    assert "line 2" in capsys.readouterr().err


def test_schema_errors_direct():
    with pytest.raises(SchemaError, match="missing key"):
        loads_network('{"name": "x", "items": [{"kind": "CONV"}]}')
    with pytest.raises(SchemaError, match="unknown key"):
        loads_network('{"name": "x", "items": [], "extra": 1}')


def test_capacity_exit_3(tmp_path, capsys):
    assert main(["simulate", "--builtin", "resnet50", "--bufs", "4096,4096,4096"]) == 3
    assert "item" in capsys.readouterr().err


def test_sweep(tmp_path):
    out = tmp_path / "sweep.csv"
    assert main(["sweep-kernel", "--sizes", "3..31", "--out", str(out)]) == 0
    r = rows(out)
    assert len(r) == 29
    for x in r:
        assert float(x["zflow_gops_model"]) >= float(x["baseline_gops_model"])
    out7 = tmp_path / "s7.csv"
    main(["sweep-kernel", "--sizes", "7", "--out", str(out7)])
    assert float(rows(out7)[0]["padded_fraction"]) == 0
    k31 = [x for x in r if x["k"] == "31"][0]
    assert int(k31["baseline_line_buffer_bits"]) / int(k31["zflow_arrangement_bits"]) > 10


def test_compare_fusion(tmp_path):
    out = tmp_path / "cf.csv"
    assert main(["compare-fusion", "--builtin", "mbconv-demo", "--out", str(out)]) == 0
    for x in rows(out):
        assert 70 <= float(x["transmission_bytes_savings_pct"]) <= 93
    out2 = tmp_path / "lk.csv"
    assert main(["compare-fusion", "--builtin", "replk-demo", "--out", str(out2)]) == 0
    assert len(rows(out2)) == 2


def test_compare_fusion_block_free(tmp_path):
    p = tmp_path / "plain.json"
    p.write_text(json.dumps({"name": "plain", "items": [
        {"kind": "CONV", "nix": 8, "niy": 8, "nif": 4, "nof": 4, "nkx": 3, "nky": 3,
         "stride": 1, "pad": 1, "group_num": 1, "activation": "ReLU", "requant_shift": 7}]}))
    out = tmp_path / "cf.csv"
    assert main(["compare-fusion", "--network", str(p), "--out", str(out)]) == 0
    assert out.read_text().count("\n") == 1


def test_verify_small_and_fault(capsys):
    assert main(["verify", "--cases", "20", "--seed", "3"]) == 0
    first = capsys.readouterr().out
    assert "20/20 oracle matches" in first
    main(["verify", "--cases", "20", "--seed", "3"])
    assert capsys.readouterr().out == first
    assert main(["verify", "--cases", "5", "--inject-fault"]) == 1
    assert "first mismatch: case 0" in capsys.readouterr().out


def test_config_overrides(tmp_path):
    out = tmp_path / "o.csv"
    assert main(["simulate", "--builtin", "replk-demo", "--strategy", "fused", "--bw", "8",
                 "--dram-latency", "50", "--pox", "4", "--poy", "4", "--pof", "8",
                 "--freq", "100", "--out", str(out)]) == 0
    assert {x["policy"] for x in rows(out)} == {"FuseWherePossible"}
