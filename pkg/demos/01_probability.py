"""Probability of a rule under a partial-truth interpretation.

Run from the repository root:  python3 demos/01_probability.py
"""
# %%
import json
from fractions import Fraction
from pathlib import Path

from horae import QuantInterpretation, parse_library, pr_exact, pr_statement, print_rule

DATA = Path(__file__).parent / "data"

# %% [markdown]
# The rule says one of two leave requests must occur, a rejection must be
# followed by a grant, and the gap between t11 and t12 is shorter than t14.

# %%
lib = parse_library((DATA / "star.hor").read_text())
rule = lib.rules[0]
print(print_rule(rule))
for eid, ev in lib.events.items():
    print(f"  {eid}: {ev.text}")

# %%
assign = json.loads((DATA / "star_assign.json").read_text())
times = {k: Fraction(str(v)) for k, v in assign["timestamps"].items()}
interp = QuantInterpretation(assign["events"], times)

# the timing constraint holds (6 - 3.5 < 3), so only the events matter:
# P(e1 or e2) = 1 and P(!e3 or e4) = 1 - 0.5 * (1 - 1/3) = 2/3
p = pr_statement(rule.statement, interp)
print("recursive evaluation:", p)
print("full enumeration:    ", pr_exact(rule.statement, interp))

# %%
# move t12 so the constraint fails and the whole rule drops to zero
late = QuantInterpretation(assign["events"], dict(times, t12=Fraction(10)))
print("with t12 = 10:", pr_statement(rule.statement, late))
