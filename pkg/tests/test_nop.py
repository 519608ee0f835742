import networkx as nx
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hemlet.engine import run
from hemlet.hwconfig import NoPConfig, SystemConfig
from hemlet.nop import MeshCoord, Transfer, floorplan, route_hops, transfer_cost


@given(st.integers(0, 6), st.integers(0, 6), st.integers(0, 6), st.integers(0, 6))
def test_hops_match_bfs_on_mesh(x0, y0, x1, y1):
    g = nx.grid_2d_graph(7, 7)
    assert route_hops(MeshCoord(x0, y0), MeshCoord(x1, y1)) == nx.shortest_path_length(g, (x0, y0), (x1, y1))


def test_transfer_cost_formula():
    nop = NoPConfig(bw=16.0, t_hop=5.0, e_bit=0.5)
    ns, pj = transfer_cost(Transfer(MeshCoord(0, 0), MeshCoord(2, 1), 1600), nop)
    assert ns == pytest.approx(3 * 5.0 + 100.0)
    assert pj == pytest.approx(1600 * 8 * 0.5)


def test_local_transfer_is_free():
    assert transfer_cost(Transfer(MeshCoord(1, 1), MeshCoord(1, 1), 10**6), NoPConfig()) == (0.0, 0.0)


def test_negative_payload_rejected():
    with pytest.raises(ValueError):
        Transfer(MeshCoord(0, 0), MeshCoord(0, 1), -1)


def test_doubling_bandwidth_halves_serialization():
    a = Transfer(MeshCoord(0, 0), MeshCoord(0, 1), 3200)
    slow = transfer_cost(a, NoPConfig(bw=8.0, t_hop=0.0))[0]
    fast = transfer_cost(a, NoPConfig(bw=16.0, t_hop=0.0))[0]
    assert slow == pytest.approx(2 * fast)


def test_floorplan_cells_unique_and_idp_central():
    fp = floorplan(SystemConfig(), 11)
    cells = list(fp.idp) + list(fp.dcim) + list(fp.acim)
    assert len(cells) == len(set(cells)) == 14
    mx, my = fp.mesh
    assert all(0 <= c.x < mx and 0 <= c.y < my for c in cells)
    centre = MeshCoord(mx // 2, my // 2)
    assert fp.idp[0] == centre
    assert max(route_hops(c, centre) for c in fp.dcim) <= min(route_hops(c, centre) for c in fp.acim)


def test_explicit_mesh_too_small():
    cfg = SystemConfig().replace(**{"nop.mesh_x": 2, "nop.mesh_y": 2})
    with pytest.raises(ValueError):
        floorplan(cfg, 11)


def test_link_contention_never_speeds_up(tiny):
    base = SystemConfig().replace(**{"nop.bw": 8.0})
    free = run(tiny, base, "glp", "native")
    busy = run(tiny, base.replace(**{"nop.link_contention": True}), "glp", "native")
    assert busy.latency_ns >= free.latency_ns
    assert busy.energy_pJ == pytest.approx(free.energy_pJ)
