import random
import pytest

from collections import Counter

from itgpy import simulation
from random_models import random_model


def test_initial_configuration(vm_model):
    config = simulation.initial(vm_model)
    assert config.as_dict() == {
        "R1": "s11", "R2": "s21", "R3": "s31", "R4": "s41", "R5": "s51"
    }
    assert config["R3"] == "s31"
    assert str(config) == "R1=s11 R2=s21 R3=s31 R4=s41 R5=s51"
    with pytest.raises(KeyError):
        config["R9"]


def test_advance_changes_one_region(vm_model):
    config = simulation.initial(vm_model)
    moved = config.advance("R2", "s22")
    assert moved.as_dict() == dict(config.as_dict(), R2="s22")
    assert config["R2"] == "s21"


def test_enabled_order(vm_model):
    candidates = simulation.enabled(vm_model, simulation.initial(vm_model))
    assert [(c.region, c.transition.channel) for c in candidates] == [
        ("R1", "acceptCoin"),
        ("R2", "returnPaymentRequest"),
        ("R3", "selectionRequest"),
        ("R4", "refillVendingProduct"),
        ("R5", "refillChangeCoin"),
    ]


def test_step_and_deadlock(ping_model):
    scheduler = simulation.Policy.round_robin().scheduler()
    fired, config = simulation.step(
        ping_model, simulation.initial(ping_model), scheduler
    )
    assert fired.label == ("A", "ping", "B")
    assert config["R"] == "b"
    result = simulation.step(ping_model, config, scheduler)
    assert result == simulation.Deadlock(config)


def test_run_stops_at_deadlock(ping_model):
    trace = simulation.run(ping_model, simulation.Policy.round_robin(), 5)
    assert len(trace) == 1


def test_run_zero_steps(vm_model):
    assert simulation.run(vm_model, simulation.Policy.round_robin(), 0) == []


def test_run_negative_steps(vm_model):
    with pytest.raises(ValueError) as error:
        simulation.run(vm_model, simulation.Policy.round_robin(), -1)
    assert str(error.value) == "max_steps must be >= 0. Got -1."


def test_round_robin_vending_machine(vm_model):
    trace = simulation.run(vm_model, simulation.Policy.round_robin(), 6)
    assert [(s.region, s.transition.channel) for s in trace] == [
        ("R1", "acceptCoin"),
        ("R2", "returnPaymentRequest"),
        ("R3", "selectionRequest"),
        ("R4", "refillVendingProduct"),
        ("R5", "refillChangeCoin"),
        ("R1", "depositCoin"),
    ]


@pytest.mark.parametrize("steps", [3, 30, 300])
def test_round_robin_fair_on_self_loops(self_loop_model, steps):
    trace = simulation.run(
        self_loop_model, simulation.Policy.round_robin(), steps
    )
    assert Counter(s.region for s in trace) == {
        "R1": steps // 3, "R2": steps // 3, "R3": steps // 3
    }


def test_round_robin_skips_blocked_regions(ping_model, self_loop_model):
    regions = ping_model.regions + self_loop_model.regions[:1]
    m = type(ping_model)(
        "Mixed", self_loop_model.agents + ping_model.agents[1:],
        ping_model.channels + self_loop_model.channels, regions,
    )
    trace = simulation.run(m, simulation.Policy.round_robin(), 4)
    assert [s.region for s in trace] == ["R", "R1", "R1", "R1"]


def test_uniform_fires_every_region(vm_model):
    trace = simulation.run(
        vm_model, simulation.Policy.uniform_random(42), 10_000
    )
    assert len(trace) == 10_000
    assert {s.region for s in trace} == {"R1", "R2", "R3", "R4", "R5"}


def test_uniform_is_deterministic(vm_model):
    policy = simulation.Policy.uniform_random(2**64 - 1)
    first = simulation.format_trace(simulation.run(vm_model, policy, 200))
    second = simulation.format_trace(simulation.run(vm_model, policy, 200))
    assert first == second


def test_sim_reset_replays(vm_model):
    sim = simulation.ITGSim(vm_model, simulation.Policy.uniform_random(7))
    first = sim.run(50)
    sim.reset()
    assert sim.configuration == simulation.initial(vm_model)
    assert sim.run(50) == first


def test_sim_types(vm_model):
    with pytest.raises(TypeError) as error:
        simulation.ITGSim(vm_model, "roundrobin")
    assert str(error.value) == "Expected type Policy but got <class 'str'>."
    sim = simulation.ITGSim(vm_model, simulation.Policy.round_robin())
    with pytest.raises(TypeError):
        sim.run(1.5)


@pytest.mark.parametrize("seed", [-1, 2**64])
def test_policy_seed_range(seed):
    with pytest.raises(ValueError):
        simulation.Policy.uniform_random(seed)


def test_policy_requires_seed():
    with pytest.raises(ValueError) as error:
        simulation.Policy(simulation.PolicyKind.UNIFORM_RANDOM)
    assert str(error.value) == "A uniform_random policy requires a seed."


def test_policy_types():
    with pytest.raises(TypeError):
        simulation.Policy.uniform_random("42")
    with pytest.raises(TypeError):
        simulation.Policy("round_robin")


def test_format_trace(ping_model):
    trace = simulation.run(ping_model, simulation.Policy.round_robin(), 1)
    assert simulation.format_trace(trace) == "1\tR\ta\tA\tping\tB\tb\n"
    assert simulation.format_trace([]) == ""


def test_read_trace():
    text = "# coins\nA\tping\tB\n\n  C\tpong\tD  \n"
    assert simulation.read_trace(text) == [
        ("A", "ping", "B"), ("C", "pong", "D")
    ]


def test_read_trace_rejects_malformed_line():
    with pytest.raises(ValueError) as error:
        simulation.read_trace("A\tping\tB\n\nA ping B\n")
    assert str(error.value) == (
        "Trace line 3: expected 3 tab-separated fields but got 1."
    )


def test_step_with_policy(ping_model):
    fired, config = simulation.step(
        ping_model, simulation.initial(ping_model),
        simulation.Policy.round_robin(),
    )
    assert fired.label == ("A", "ping", "B")
    assert config["R"] == "b"
    with pytest.raises(TypeError):
        simulation.step(ping_model, config, "roundrobin")


def test_scheduler_is_abstract():
    with pytest.raises(TypeError):
        simulation._Scheduler()


def test_accepts_coin_trace(vm_model):
    result = simulation.accepts(vm_model, [
        ("Customer", "acceptCoin", "CoinReceptacle"),
        ("CoinReceptacle", "depositCoin", "CoinStore"),
    ])
    assert result.accepted
    assert [c["R1"] for c in result.witness] == ["s11", "s12", "s13"]
    assert result.rejected_at is None


def test_accepts_rejects_out_of_order(vm_model):
    result = simulation.accepts(vm_model, [
        ("CoinReceptacle", "depositCoin", "CoinStore"),
    ])
    assert not result
    assert result.rejected_at == 1
    assert result.witness == ()


def test_accepts_empty_trace(vm_model):
    result = simulation.accepts(vm_model, [])
    assert result.accepted
    assert result.witness == (simulation.initial(vm_model),)


def test_accepts_interleaving(vm_model):
    trace = [
        ("Vendor", "refillChangeCoin", "CoinStore"),
        ("Customer", "selectionRequest", "ProductSelectionButtons"),
        ("Vendor", "refillChangeCoin", "CoinStore"),
        ("Customer", "acceptCoin", "CoinReceptacle"),
    ]
    result = simulation.accepts(vm_model, trace)
    assert result.accepted
    assert result.witness[-1].as_dict() == {
        "R1": "s12", "R2": "s21", "R3": "s32", "R4": "s41", "R5": "s51"
    }


def test_simulated_traces_are_accepted(vm_model):
    trace = simulation.run(vm_model, simulation.Policy.uniform_random(3), 40)
    result = simulation.accepts(vm_model, [s.label for s in trace])
    assert result.accepted
    assert len(result.witness) == 41


def _traces_up_to(m, depth):
    """Every label sequence of length <= depth, by explicit enumeration."""
    start = {r.id: r.initial for r in m.regions}
    traces = {()}
    frontier = [((), start)]
    for _ in range(depth):
        expanded = []
        for trace, states in frontier:
            for region in m.regions:
                for t in region.transitions:
                    if t.source != states[region.id]:
                        continue
                    moved = dict(states)
                    moved[region.id] = t.target
                    label = (t.caller, t.channel, t.callee)
                    expanded.append((trace + (label,), moved))
        traces.update(trace for trace, _ in expanded)
        frontier = expanded
    return traces


def _witness_is_run(m, trace, witness):
    for label, before, after in zip(trace, witness, witness[1:]):
        moves = [
            before.advance(c.region, c.transition.target)
            for c in simulation.enabled(m, before)
            if c.label == label
        ]
        if after not in moves:
            return False
    return True


def test_accepts_matches_enumeration():
    rng = random.Random(11)
    for _ in range(200):
        m = random_model(
            rng, max_regions=2, max_states=3, max_transitions=4
        )
        traces = _traces_up_to(m, 4)
        alphabet = {
            t.interaction.label for r in m.regions for t in r.transitions
        }
        alphabet.add(("nobody", "nothing", "nowhere"))
        for trace in traces:
            result = simulation.accepts(m, trace)
            assert result.accepted
            assert result.witness[0] == simulation.initial(m)
            assert _witness_is_run(m, trace, result.witness)
            if len(trace) == 4:
                continue
            for label in alphabet:
                extended = trace + (label,)
                result = simulation.accepts(m, extended)
                assert result.accepted == (extended in traces)
                if not result.accepted:
                    assert result.rejected_at == len(extended)
