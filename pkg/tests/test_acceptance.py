"""Exit criteria on the reference configuration, one test per criterion.

The truncation gate runs first; if it fails the remaining criteria fail with
its diagnostic instead of running on an under-resolved model.
"""
import pytest

from heatctl import acceptance

ORDER = [num for num, *_ in acceptance.CRITERIA]
LINES = []
_state = {}


def _line(res):
    worst = [v for v in res["verdicts"] if not v["pass"]]
    tail = "" if not worst else f"  <- {worst[0]['name']}: measured={worst[0]['measured']} bound={worst[0]['bound']}"
    return f"[{'PASS' if res['pass'] else 'FAIL'}] criterion {res['criterion']}: {res['name']} ({res['runtime']:.2f} s){tail}"


@pytest.mark.parametrize("number", ORDER, ids=[f"criterion_{n}" for n in ORDER])
def test_criterion(number, ref):
    gate = _state.get("gate")
    if number != 8 and gate is not None and not gate["pass"]:
        LINES.append(f"[FAIL] criterion {number}: aborted, truncation gate failed")
        pytest.fail(f"truncation diagnostic: {gate['verdicts'][0]}")
    res = acceptance.run_criterion(number, ref, seed=0)
    if number == 8:
        _state["gate"] = res
    line = _line(res)
    LINES.append(line)
    print(line)
    for v in res["verdicts"]:
        print(f"    [{'PASS' if v['pass'] else 'FAIL'}] {v['name']}: measured={v['measured']} bound={v['bound']}")
    assert res["pass"], line
