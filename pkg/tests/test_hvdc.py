import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from checks import assert_complementarity, assert_hvdc_complementarity
from qvsec.network import PQ, PV, SLACK, Branch, Bus, Generator, HvdcLink, Network
from qvsec.powerflow import (HvdcConfigError, branch_flows, embed_hvdc, pf_reactive, power_balance,
                             signed_pf, solve)


def corridor(link=None, ac_in_service=True):
    """Slack/generator area (1, 2) feeding a load area (3, 4) over branch 2-3."""
    buses = (Bus(1, SLACK, 1.0), Bus(2, PV, 1.02, p_load=10), Bus(3, PQ, p_load=80, q_load=20),
             Bus(4, PQ, p_load=30, q_load=10))
    gens = (Generator(1, 0.0, 1.0), Generator(2, 100.0, 1.02, q_min=-200, q_max=200))
    branches = (Branch(1, 2, 0.005, 0.05), Branch(2, 3, 0.01, 0.12, b=0.02, in_service=ac_in_service),
                Branch(1, 4, 0.02, 0.25), Branch(3, 4, 0.01, 0.1))
    return Network(100.0, buses, gens, branches, (link,) if link else ())


def test_unity_pf_injections():
    emb = embed_hvdc(corridor(), HvdcLink(2, 3, 100.0, "p_pf", pf_from=1.0, pf_to=1.0))
    assert (emb.sending.p_inj, emb.sending.q_inj) == (-100.0, 0.0)
    assert (emb.receiving.p_inj, emb.receiving.q_inj) == (100.0, 0.0)


def test_lagging_receiving_end_delivers_q():
    emb = embed_hvdc(corridor(), HvdcLink(2, 3, 100.0, "p_pf", pf_from=1.0, pf_to=0.95))
    assert emb.receiving.q_inj == pytest.approx(32.868, abs=1e-3)
    assert emb.receiving.q_inj == pytest.approx(100 * math.tan(math.acos(0.95)))


def test_sign_convention():
    assert pf_reactive(100.0, -0.95) == pytest.approx(-32.868, abs=1e-3)  # leading receiving end absorbs
    assert pf_reactive(-100.0, 0.95) == pytest.approx(-32.868, abs=1e-3)  # lagging sending end absorbs
    assert pf_reactive(-100.0, -0.95) == pytest.approx(32.868, abs=1e-3)


def test_loss_factor_reduces_delivered_power():
    emb = embed_hvdc(corridor(), HvdcLink(2, 3, 100.0, "p_pf", loss_factor=0.02, pf_from=1.0, pf_to=1.0))
    assert emb.receiving.p_inj == pytest.approx(98.0)
    assert emb.loss_mw == pytest.approx(2.0)


@pytest.mark.parametrize("pf", [0.0, 1.5, -1.01])
def test_invalid_power_factor(pf):
    with pytest.raises(HvdcConfigError):
        pf_reactive(10.0, pf)


@given(st.floats(1e-3, 1e4), st.floats(-1e4, 1e4))
def test_signed_pf_inverts_pf_reactive(p, q):
    for p_inj in (p, -p):
        pf = signed_pf(p_inj, q)
        assert 0 < abs(pf) <= 1
        assert pf_reactive(p_inj, pf) == pytest.approx(q, rel=1e-6, abs=1e-6 * p)


def test_p_v_end_on_slack_rejected():
    link = HvdcLink(1, 3, 20.0, "p_v", v_set_from=1.0, v_set_to=1.0, q_min_from=-50, q_max_from=50,
                    q_min_to=-50, q_max_to=50)
    with pytest.raises(HvdcConfigError, match="slack"):
        solve(corridor(link))


def test_p_pf_solution_has_fixed_injections():
    link = HvdcLink(2, 3, 60.0, "p_pf", pf_from=0.98, pf_to=-0.97)
    net = corridor(link, ac_in_service=False)
    sol = solve(net)
    assert sol.converged
    assert sol.hvdc_q[(0, "from")] == pytest.approx(pf_reactive(-60.0, 0.98))
    assert sol.hvdc_q[(0, "to")] == pytest.approx(pf_reactive(60.0, -0.97))
    bal = power_balance(net, sol)
    assert abs(bal.residual) < 1e-6


def test_p_v_regulates_both_ends():
    link = HvdcLink(2, 3, 60.0, "p_v", loss_factor=0.01, v_set_from=1.02, v_set_to=1.0,
                    q_min_from=-100, q_max_from=100, q_min_to=-100, q_max_to=100)
    net = corridor(link, ac_in_service=False)
    sol = solve(net)
    assert sol.converged
    assert sol.voltage(3) == pytest.approx(1.0, abs=1e-9)
    assert not sol.hvdc_at_limit
    assert_hvdc_complementarity(net, sol)
    assert_complementarity(net, sol)
    bal = power_balance(net, sol)
    assert bal.hvdc_losses == pytest.approx(0.6)
    assert abs(bal.residual) < 1e-6


def test_p_v_zero_q_max_matches_unity_p_pf():
    ppf = corridor(HvdcLink(2, 3, 60.0, "p_pf", pf_from=1.0, pf_to=1.0), ac_in_service=False)
    pv = corridor(HvdcLink(2, 3, 60.0, "p_v", v_set_from=1.02, v_set_to=1.0, q_min_from=-100,
                           q_max_from=100, q_min_to=-100, q_max_to=0.0), ac_in_service=False)
    a, b = solve(ppf), solve(pv)
    assert a.converged and b.converged
    assert b.pins.get(3) == "max" and (0, "to") in b.hvdc_at_limit
    assert b.hvdc_q[(0, "to")] == 0.0
    assert np.max(np.abs(a.v_mag - b.v_mag)) <= 1e-8
    assert np.max(np.abs(a.v_ang - b.v_ang)) <= 1e-8
    assert_hvdc_complementarity(pv, b)


def test_base_flow_injection_equivalence():
    base_net = corridor()
    base = solve(base_net)
    flows = branch_flows(base_net, base)
    s_f, s_t = flows.s_from[1], flows.s_to[1]
    assert s_f.real > 0
    link = HvdcLink(2, 3, s_f.real, "p_pf", loss_factor=(s_f.real + s_t.real) / s_f.real,
                    pf_from=signed_pf(-s_f.real, -s_f.imag), pf_to=signed_pf(-s_t.real, -s_t.imag))
    sol = solve(corridor(link, ac_in_service=False), warm_start=base)
    assert np.max(np.abs(sol.v_mag - base.v_mag)) <= 10 * 1e-8
    assert sol.hvdc_q[(0, "to")] == pytest.approx(-s_t.imag, abs=1e-9)


def test_fixed_q_end_overrides_power_factor():
    emb = embed_hvdc(corridor(), HvdcLink(2, 3, 0.0, "p_pf", q_from=-15.0, q_to=12.5))
    assert (emb.sending.p_inj, emb.sending.q_inj) == (0.0, -15.0)
    assert (emb.receiving.p_inj, emb.receiving.q_inj) == (0.0, 12.5)
    emb = embed_hvdc(corridor(), HvdcLink(2, 3, 50.0, "p_pf", pf_from=1.0, q_to=5.0))
    assert (emb.sending.q_inj, emb.receiving.q_inj) == (0.0, 5.0)


def test_p_pf_end_needs_pf_or_q():
    from qvsec.network import parse_native_case, serialize_network, validate
    from qvsec.network.errors import CaseSchemaError

    net = corridor(HvdcLink(2, 3, 0.0, "p_pf", q_from=-15.0), ac_in_service=False)
    assert [v.code for v in validate(net)] == ["hvdc_pf"]
    good = corridor(HvdcLink(2, 3, 0.0, "p_pf", q_from=-15.0, q_to=1.0), ac_in_service=False)
    assert validate(good) == []
    assert parse_native_case(serialize_network(good)).hvdc_links == good.hvdc_links
    with pytest.raises(CaseSchemaError):
        parse_native_case(serialize_network(net))
