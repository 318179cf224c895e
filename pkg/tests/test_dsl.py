import json
import random
import pytest

from itgpy import model
from itgpy.dsl import (
    ITGParseError,
    ITGReader,
    ITGWriter,
    ParseDiagnostic,
    SourceSpan,
    model_from_dict,
    model_to_dict,
    parse,
    print_model,
)
from random_models import random_model


def test_parse_vending_machine(vm_text):
    vm = parse(vm_text)
    assert isinstance(vm, model.SystemModel)
    assert vm.name == "VendingMachine"
    assert vm.region_ids == ("R1", "R2", "R3", "R4", "R5")
    assert [len(r.transitions) for r in vm.regions] == [4, 6, 9, 1, 1]
    assert vm.agent_index["CoinReceptacle"].display == ":Coin Receptacle"
    assert vm.agent_index["Customer"].display is None
    assert vm.params_of("productSelect") == (
        model.Parameter("in", "productNumber", "ProductNumber"),
        model.Parameter("in", "productValue", "Real"),
    )
    assert vm.params_of("returnPayment") == ()


def test_parse_records_spans(vm_text):
    vm = parse(vm_text)
    first = vm.regions[0].transitions[0]
    lines = vm_text.splitlines()
    assert lines[first.span.line - 1].strip().startswith("s11 -> s12")
    assert first.span.column == 3


def test_vending_machine_round_trip(vm_model):
    assert parse(print_model(vm_model)) == vm_model


def test_print_is_canonical(vm_model):
    text = print_model(vm_model)
    assert print_model(parse(text)) == text
    assert "  s41 -> s41 : Vendor refillVendingProduct ProductStore\n" in text
    assert (
        "channel productSelect(in productNumber: ProductNumber, "
        "in productValue: Real)\n"
    ) in text


def test_empty_model_round_trip():
    assert print_model(model.SystemModel(name="M")) == "system M\n"
    assert parse("system M\n") == model.SystemModel(name="M")


def test_random_models_round_trip():
    rng = random.Random(42)
    for _ in range(1000):
        m = random_model(rng)
        assert model.validate(m) == []
        assert parse(print_model(m)) == m


def test_state_lines():
    m = parse(
        "system M\nactor A\nblock B\nchannel c()\n"
        "region R initial s1 {\n  state s3\n  s1 -> s2 : A c B\n}\n"
    )
    assert m.regions[0].states == frozenset({"s1", "s2", "s3"})
    assert "  state s3\n" in print_model(m)


def test_initial_state_is_not_implied():
    m = parse("system M\nregion R initial s9 { }\n")
    assert m.regions[0].states == frozenset()
    assert [d.rule for d in model.validate(m)] == ["INITIAL_NOT_IN_STATES"]
    declared = parse("system M\nregion R initial s9 { state s9 }\n")
    assert model.validate(declared) == []


def test_keywords_are_contextual():
    m = parse(
        "system region\nactor state\nblock initial\nchannel channel()\n"
        "region R initial state {\n"
        "  state -> initial : state channel initial\n}\n"
    )
    assert isinstance(m, model.SystemModel)
    assert m.regions[0].transitions[0].caller == "state"
    assert m.regions[0].states == frozenset({"state", "initial"})


def test_display_escapes_round_trip():
    m = parse('system M\nblock B "say \\"hi\\" \\\\ bye"\n')
    assert m.agents[0].display == 'say "hi" \\ bye'
    assert parse(print_model(m)) == m


def test_syntax_error():
    result = parse(
        "system M\nregion R initial s1 { s1 -> : A ping B }\n"
    )
    assert result == [
        ParseDiagnostic(
            SourceSpan(2, 29, 1),
            "expected an identifier but found ':'",
            "SYNTAX_ERROR",
        )
    ]


def test_syntax_error_at_end_of_input():
    result = parse("system M\nregion R initial s1 {")
    assert len(result) == 1
    assert result[0].code == "SYNTAX_ERROR"
    assert result[0].message == (
        "expected a transition, 'state' or '}' but found end of input"
    )


def test_lex_errors_once_per_line():
    result = parse("system M\nactor A$$\nblock B%\n")
    assert [(d.code, d.span.line, d.span.column) for d in result] == [
        ("LEX_ERROR", 2, 8),
        ("LEX_ERROR", 3, 8),
    ]
    assert result[0].message == "unexpected character '$'"


def test_syntax_error_before_lex_error():
    result = parse("sytem M\nactor A\nblock B @\n")
    assert [(d.code, d.span.line, d.span.column) for d in result] == [
        ("SYNTAX_ERROR", 1, 1),
        ("LEX_ERROR", 3, 9),
    ]
    assert result[0].message == "expected 'system' but found 'sytem'"


def test_lex_error_before_syntax_error():
    result = parse("system M\nactor A %\nregion R initial s1 { s1 -> }\n")
    assert [(d.code, d.span.line) for d in result] == [
        ("LEX_ERROR", 2),
        ("SYNTAX_ERROR", 3),
    ]


def test_parse_type():
    with pytest.raises(TypeError) as error:
        parse(None)
    assert str(error.value) == "Expected type str but got <class 'NoneType'>."


def test_reader_requires_one_source():
    with pytest.raises(ValueError) as error:
        ITGReader()
    assert str(error.value) == "Provide exactly one of itg_file or itg_str."
    with pytest.raises(ValueError):
        ITGReader(itg_file="vm.itg", itg_str="system M")


def test_reader_file(tmp_path, vm_text, vm_model):
    path = tmp_path / "vm.itg"
    path.write_text(vm_text, encoding="utf-8")
    reader = ITGReader(itg_file=path)
    assert reader.get_diagnostics() == []
    assert reader.get_model() == vm_model


def test_reader_parse_error():
    reader = ITGReader(itg_str="system\n")
    with pytest.raises(ITGParseError) as error:
        reader.get_model()
    assert error.value.diagnostics == reader.get_diagnostics()
    assert str(error.value) == (
        "2:1: SYNTAX_ERROR: expected an identifier but found end of input"
    )


def test_write_json(tmp_path, vm_text, vm_model):
    path = tmp_path / "vm.json"
    ITGReader(itg_str=vm_text).write_json(path)
    with open(path) as file:
        assert model_from_dict(json.load(file)) == vm_model


def test_model_dict_round_trip(itg01_model):
    assert model_from_dict(model_to_dict(itg01_model)) == itg01_model


def test_model_from_dict_missing_key():
    with pytest.raises(ValueError) as error:
        model_from_dict({"agents": []})
    assert str(error.value) == "Missing key 'system' in model dictionary."


def test_writer(tmp_path, vm_model):
    path = tmp_path / "out.itg"
    ITGWriter(vm_model).write_itg(path)
    assert parse(path.read_text(encoding="utf-8")) == vm_model


def test_writer_warns_on_invalid_model(ping_model):
    broken = model.SystemModel(
        name=ping_model.name,
        agents=ping_model.agents[:1],
        channels=ping_model.channels,
        regions=ping_model.regions,
    )
    with pytest.warns(UserWarning):
        text = ITGWriter(broken).get_itg()
    assert text.startswith("system Ping\n")
