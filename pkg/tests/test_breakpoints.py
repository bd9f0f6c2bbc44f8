import random

import pytest

from got import ObjectState, State
from got.breakpoints import BreakpointSyntaxError, compile_predicate


def wc_state(counts: dict) -> State:
    return State(
        ObjectState("WordCount", w, {"word": w, "count": c}) for w, c in counts.items()
    )


def test_count_equals_six():
    predicate = compile_predicate("exists(WordCount, count == 6)")
    assert predicate.matches(wc_state({"bar": 6}))
    assert not predicate.matches(wc_state({"bar": 4}))


def test_exists_without_clauses():
    predicate = compile_predicate("exists(Line)")
    assert not predicate.matches(State())
    assert predicate.matches(State([ObjectState("Line", 0, {"line_num": 0, "line": "x"})]))


def test_and_clauses():
    predicate = compile_predicate("exists(WordCount, count > 2 and count < 6)")
    assert predicate.matches(wc_state({"bar": 4}))
    assert not predicate.matches(wc_state({"bar": 6, "foo": 1}))


def test_string_and_bool_literals():
    p = compile_predicate("exists(WordCount, word == 'bar' and count >= 1)")
    assert p.matches(wc_state({"bar": 1}))
    assert not p.matches(wc_state({"foo": 1}))
    stop_state = State([ObjectState("Stop", 0, {"index": 0, "accepted": True})])
    assert compile_predicate("exists(Stop, accepted == true)").matches(stop_state)
    assert not compile_predicate("exists(Stop, accepted == false)").matches(stop_state)


def test_missing_dimension_is_false():
    predicate = compile_predicate("exists(WordCount, nothing == 1)")
    assert not predicate.matches(wc_state({"bar": 1}))


def test_kind_mismatch_is_false_not_an_error():
    predicate = compile_predicate("exists(WordCount, count == 'six')")
    assert not predicate.matches(wc_state({"bar": 6}))
    predicate = compile_predicate("exists(Stop, accepted == 1)")
    state = State([ObjectState("Stop", 0, {"index": 0, "accepted": True})])
    assert not predicate.matches(state)


@pytest.mark.parametrize(
    "bad",
    [
        "",
        "exists",
        "exists()",
        "exists(WordCount",
        "exists(WordCount, count = 6)",
        "exists(WordCount, count == )",
        "exists(WordCount, count == 6) extra",
        "missing(WordCount)",
        "exists(WordCount, count ==",
        "exists(WordCount count == 6)",
    ],
)
def test_parse_errors_surface_at_registration(bad):
    with pytest.raises(BreakpointSyntaxError):
        compile_predicate(bad)


def oracle_scan(state: State, type_name: str, clauses) -> bool:
    for obj in state.of_type(type_name):
        ok = True
        for dim, op, value in clauses:
            actual = obj.dims.get(dim)
            if actual is None or type(actual) is not type(value):
                ok = False
                break
            if op == "==":
                ok = actual == value
            elif op == "!=":
                ok = actual != value
            elif op == "<":
                ok = actual < value
            elif op == "<=":
                ok = actual <= value
            elif op == ">":
                ok = actual > value
            else:
                ok = actual >= value
            if not ok:
                break
        if ok:
            return True
    return False


def test_random_states_match_scan_oracle():
    rng = random.Random(21)
    ops = ["==", "!=", "<", "<=", ">", ">="]
    for _ in range(300):
        counts = {f"w{i}": rng.randint(0, 9) for i in range(rng.randint(0, 5))}
        state = wc_state(counts)
        clauses = [
            ("count", rng.choice(ops), rng.randint(0, 9))
            for _ in range(rng.randint(1, 3))
        ]
        text = "exists(WordCount, " + " and ".join(
            f"{dim} {op} {val}" for dim, op, val in clauses
        ) + ")"
        assert compile_predicate(text).matches(state) == oracle_scan(
            state, "WordCount", clauses
        )
