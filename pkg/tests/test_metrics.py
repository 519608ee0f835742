import pytest
from hypothesis import given
from hypothesis import strategies as st

from hemlet.engine import SimReport, run
from hemlet.hwconfig import SystemConfig
from hemlet.metrics import (CSV_COLUMNS, SweepPoint, normalize, read_csv, to_csv, to_dat, tops,
                            tops_per_watt)
from hemlet.workload import ViTModelSpec, mac_count


def fake(latency_ns=1e9, energy_pJ=1e12, ops=10**12, mapping="layerwise", mode="native",
         config="A32D16", bw=32.0, model="m"):
    zero = {"SA": 0.0, "Buffer": 0.0, "IC": 0.0}
    return SimReport(model=model, config=config, bw_GBps=bw, mapping=mapping, mode=mode,
                     latency_ns=latency_ns, energy_pJ=energy_pJ, energy_breakdown={"SA": energy_pJ},
                     busy_ns={}, acim_busy_ns=zero, adc_utilization=0.5, macs_static=0,
                     macs_dynamic=0, ops=ops, nop_bytes_by_tag={})


def test_one_second_one_tera_op():
    assert tops(fake()) == pytest.approx(1.0)
    assert tops(fake(latency_ns=2e9)) == pytest.approx(0.5)


def test_tops_per_watt_units():
    # 1e12 ops in 1 J
    assert tops_per_watt(fake()) == pytest.approx(1.0)
    assert tops_per_watt(fake(latency_ns=5e9)) == pytest.approx(1.0)


def test_ops_from_spec_without_vector_work():
    spec = ViTModelSpec("unit", d=1, D=1, N=1, H=1, L=1)
    mc = mac_count(spec)
    assert mc.ops == 2 * mc.macs + mc.vector + mc.bias
    r = fake(latency_ns=1.0, energy_pJ=1.0, ops=0)
    assert tops_per_watt(r, spec) == mc.ops


def test_tops_times_latency_is_ops(tiny):
    r = run(tiny, SystemConfig(), "glp", "hemlet")
    assert tops(r) * r.latency_ns * 1e3 == pytest.approx(mac_count(tiny).ops, rel=1e-12)
    assert tops(r, tiny) == tops(r)


def test_normalize_against_self():
    p = SweepPoint.of(fake())
    (row,) = normalize([p])
    assert row["norm_latency"] == row["norm_energy"] == 1.0


def test_normalize_two_to_one():
    base = SweepPoint.of(fake(latency_ns=2.0, energy_pJ=4.0))
    fast = SweepPoint.of(fake(latency_ns=1.0, energy_pJ=2.0, mapping="glp", mode="hemlet"))
    rows = normalize([base, fast])
    assert [r["norm_latency"] for r in rows] == [1.0, 0.5]


def test_normalize_requires_one_baseline():
    with pytest.raises(ValueError):
        normalize([SweepPoint.of(fake(mapping="glp"))])
    rows = normalize([SweepPoint.of(fake(mapping="glp"))], baseline={"mapping": "glp"})
    assert rows[0]["norm_latency"] == 1.0


@given(st.lists(st.floats(0.1, 1e6), min_size=2, max_size=6), st.floats(0.01, 100))
def test_normalize_is_scale_free(lats, c):
    pts = [SweepPoint.of(fake(latency_ns=x, bw=float(i), mapping="layerwise" if i == 0 else "glp"))
           for i, x in enumerate(lats)]
    scaled = [SweepPoint.of(fake(latency_ns=x * c, bw=float(i), mapping="layerwise" if i == 0 else "glp"))
              for i, x in enumerate(lats)]
    sel = {"mapping": "layerwise"}
    a = [r["norm_latency"] for r in normalize(pts, sel)]
    b = [r["norm_latency"] for r in normalize(scaled, sel)]
    assert a == pytest.approx(b, rel=1e-12)
    assert all(x > 0 for x in a)


def test_sweep_point_label_must_match():
    with pytest.raises(ValueError):
        SweepPoint("A18D9", 32.0, "m", "layerwise", "native", fake())


def test_csv_round_trip():
    pts = [SweepPoint.of(fake(latency_ns=3.5)), SweepPoint.of(fake(mapping="glp", mode="hemlet"))]
    text = to_csv(pts)
    assert text.splitlines()[0] == ",".join(CSV_COLUMNS)
    rows = read_csv(text)
    assert rows[0]["latency_ns"] == 3.5 and rows[1]["mode"] == "hemlet"
    # rows from a CSV normalize the same way as live points
    assert normalize(rows) == normalize(pts)


def test_dat_blocks():
    pts = [SweepPoint.of(fake(bw=bw, mapping=mp, mode=md, latency_ns=lat))
           for bw in (8.0, 16.0) for mp, md, lat in (("layerwise", "native", 4.0), ("glp", "hemlet", 2.0))]
    rows = normalize(pts, group_by=("model", "config", "bw_GBps"))
    dat = to_dat(rows).splitlines()
    assert dat[1] == "# bw_GBps baseline hemlet"
    assert dat[2] == "8 1 0.5"
