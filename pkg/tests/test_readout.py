import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from dqdsim import readout as R
from dqdsim.core import DeviceParams, Level

CFG = R.ReadoutConfig(delta_eps=1.0)


def brute_dynamics(psi, cfg, params, times):
    h = np.array([[cfg.bias, cfg.t_c], [cfg.t_c, -cfg.bias]])
    return np.array([abs((expm(-1j * h * t / params.hbar) @ psi)[0]) ** 2 for t in times])


def first_peak_on_grid(pl, times):
    """Grid oracle: first local maximum of P_L or P_R that exceeds 1/2."""
    pr = 1 - pl
    for k in range(1, len(times) - 1):
        if pl[k] >= pl[k - 1] and pl[k] >= pl[k + 1] and pl[k] > 0.5:
            return "L", times[k]
        if pr[k] >= pr[k - 1] and pr[k] >= pr[k + 1] and pr[k] > 0.5:
            return "R", times[k]
    return None, None


def test_config_defaults_and_validation():
    assert CFG.bias == 0.5 and CFG.t_c == 0.5
    for bad in (dict(delta_eps=0), dict(t_c=-1), dict(switch_off_time=-1.0), dict(switch_off_time="soon"), dict(threshold=0.5)):
        with pytest.raises(ValueError):
            R.ReadoutConfig(**bad)


@pytest.mark.parametrize("initial", ["plus", "minus", "L", (0.6, 0.8j)])
def test_dynamics_against_expm_and_conservation(params, initial):
    t = np.linspace(0, 5, 41)
    pl, pr = R.readout_dynamics(initial, CFG, params, t)
    np.testing.assert_allclose(pl, brute_dynamics(R.initial_state(initial), CFG, params, t), atol=1e-12)
    assert np.abs(pl + pr - 1).max() < 1e-12


def test_first_visited_convention(params):
    t = np.linspace(0, CFG.period(params), 20001)
    for initial, dot in (("plus", "L"), ("minus", "R")):
        pl, _ = R.readout_dynamics(initial, CFG, params, t)
        g_dot, g_t = first_peak_on_grid(pl, t)
        a_dot, a_t = R.first_visited_dot(initial, CFG, params)
        assert g_dot == a_dot == dot
        assert a_t == pytest.approx(g_t, abs=2 * t[1])


def test_mirror_symmetry(params):
    t = np.linspace(0, 4, 33)
    pl_p, _ = R.readout_dynamics("plus", CFG, params, t)
    # X Z maps |+> to |-> and H to -H; H is real, so populations are unchanged
    _, pr_m = R.readout_dynamics("minus", CFG, params, t)
    np.testing.assert_allclose(pl_p, pr_m, atol=1e-12)


def test_frozen_without_tunneling(params):
    cfg = R.ReadoutConfig(delta_eps=1.0, t_c=0.0)
    pl, _ = R.readout_dynamics((0.6, 0.8), cfg, params, np.linspace(0, 10, 11))
    assert np.ptp(pl) < 1e-14


def test_auto_switch_off_is_grid_maximum(params):
    t = np.linspace(0, CFG.period(params), 40001)
    for initial in ("plus", "minus", (0.8, 0.6), (0.6, -0.8j)):
        pl, _ = R.readout_dynamics(initial, CFG, params, t)
        ts, p = R.auto_switch_off(initial, CFG, params)
        k = np.argmax(np.abs(2 * pl - 1))
        assert abs(2 * p - 1) == pytest.approx(abs(2 * pl[k] - 1), abs=1e-6)
        assert ts == pytest.approx(t[k], abs=3 * t[1])


def test_resonant_localization_is_complete(params):
    ts, pl = R.auto_switch_off("plus", CFG, params)
    assert pl == pytest.approx(1.0, abs=1e-12)
    assert ts == pytest.approx(0.5 * CFG.period(params), rel=1e-12)
    assert R.auto_switch_off("minus", CFG, params)[1] == pytest.approx(0.0, abs=1e-12)


def test_localized_superposition_reads_immediately(params):
    a = 1 / math.sqrt(2)
    ts, pl = R.auto_switch_off((a, a), CFG, params)
    assert ts == 0.0 and pl == pytest.approx(1.0, abs=1e-12)
    m = R.simulate_measurement((a, a), CFG, params, 0)
    assert m.dot == "L" and m.switch_off_used == 0.0


def test_measurement_fidelity_and_determinism(params):
    rng = np.random.default_rng(2)
    for initial, dot in (("plus", "L"), ("minus", "R")):
        outs = [R.simulate_measurement(initial, CFG, params, rng).dot for _ in range(1000)]
        assert outs.count(dot) >= 999
    a = R.simulate_measurement((0.8, 0.6), CFG, params, 17)
    b = R.simulate_measurement((0.8, 0.6), CFG, params, 17)
    assert a == b


def test_fixed_switch_off(params):
    t = 0.25 * CFG.period(params)
    cfg = R.ReadoutConfig(delta_eps=1.0, switch_off_time=t, threshold=0.0)
    m = R.simulate_measurement("plus", cfg, params, 1)
    assert m.switch_off_used == t


def test_inconclusive(params):
    cfg = R.ReadoutConfig(delta_eps=1.0, t_c=0.0)
    with pytest.raises(R.InconclusiveReadout) as err:
        R.simulate_measurement("plus", cfg, params, 0)
    assert err.value.max_localization == pytest.approx(0.5)


def test_thermal_examples():
    assert R.thermal_initialize(1.0, 0.0) == (1.0, 0.0)
    assert R.thermal_initialize(math.log(3), 1.0)[1] == pytest.approx(0.25, rel=1e-14)
    assert R.thermal_initialize(10.0, 1.0)[1] < 5e-5
    with pytest.raises(ValueError):
        R.thermal_initialize(0.0, 1.0)


@given(st.floats(1e-3, 20), st.floats(1e-2, 10))
def test_thermal_detailed_balance(de, kT):
    pp, pm = R.thermal_initialize(de, kT)
    assert pp + pm == pytest.approx(1.0, rel=1e-15)
    assert pm / pp == pytest.approx(math.exp(-de / kT), rel=1e-12)


@pytest.mark.parametrize("target", ["plus", "minus"])
@pytest.mark.parametrize("de", [0.5, 1.0, 3.0])
def test_fast_initialize_fidelity(target, de):
    cfg = R.ReadoutConfig(delta_eps=de)
    for kT in (0.0, 0.5):
        params = DeviceParams(temperature_kT=kT)
        psi = R.apply_steps(R.fast_initialize(target, cfg, params), params)
        assert R.state_fidelity(psi, target) > 1 - 1e-6


def test_round_trip_and_inversion(params):
    plus = R.fast_initialize("plus", CFG, params)
    minus = R.fast_initialize("minus", CFG, params)
    assert minus[: len(plus)] == plus and len(minus) == len(plus) + 1
    psi = R.apply_steps(plus, params)
    a, b = np.vdot(R.PLUS, psi), np.vdot(R.MINUS, psi)
    assert R.first_visited_dot((a, b), CFG, params)[0] == "L"
    rng = np.random.default_rng(9)
    for steps, dot in ((plus, "L"), (minus, "R")):
        psi = R.apply_steps(steps, params)
        amp = (np.vdot(R.PLUS, psi), np.vdot(R.MINUS, psi))
        outs = [R.simulate_measurement(amp, CFG, params, rng).dot for _ in range(1000)]
        assert outs.count(dot) >= 999


def test_plan_single_qubit():
    plan = R.plan_chain_load(1)
    loads = [e for e in plan if e.kind == "load"]
    assert len(loads) == 2
    for k in range(2):
        assert sum(e.kind == "shuttle" and e.electron == k for e in plan) <= 1


def test_plan_three_qubits():
    plan = R.plan_chain_load(3)
    counts = [sum(e.kind == "shuttle" and e.electron == k for e in plan) for k in range(6)]
    assert max(counts) == 5 and counts[0] == 5
    assert sum(counts) == 3 * 5
    assert R.replay_plan(plan, 3) == [5, 4, 3, 2, 1, 0]


@pytest.mark.parametrize("n", [1, 2, 4, 7])
def test_plan_quadratic_length(n):
    plan = R.plan_chain_load(n)
    assert sum(e.kind == "shuttle" for e in plan) == n * (2 * n - 1)


def test_plan_inversions_follow_levels():
    plan = R.plan_chain_load(2, [Level.C1, Level.C0])
    inverted = {2 * 2 - 1 - e.electron for e in plan if e.kind == "invert"}
    # C1 = |-+> inverts DQD 0 of qubit 0; C0 = |+-> inverts DQD 1 of qubit 1
    assert inverted == {R.slot_of(0, 0), R.slot_of(1, 1)}


def test_collisions_detected():
    plan = R.plan_chain_load(2)
    bad = [R.PlanEvent("load", 0, 0), R.PlanEvent("load", 1, 0)]
    with pytest.raises(R.PlanCollision):
        R.replay_plan(bad, 2)
    swapped = list(plan)
    first_shuttle = next(i for i, e in enumerate(plan) if e.kind == "shuttle")
    del swapped[first_shuttle]
    with pytest.raises(R.PlanCollision):
        R.validate_plan(swapped, 2)
    with pytest.raises(R.PlanCollision):
        R.validate_plan(plan[:3], 2)
