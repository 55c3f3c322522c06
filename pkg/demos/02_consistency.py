"""Checking a rule library for conflicts, with and without timing.

Run from the repository root:  python3 demos/02_consistency.py
"""
# %%
from pathlib import Path

from horae import check_qualitative, check_quantitative, emit_smtlib, parse_library

DATA = Path(__file__).parent / "data"

# %%
lib = parse_library((DATA / "conflict.hor").read_text())
report = check_qualitative(lib)
print(report.verdict.value, "core:", report.conflict_core)

# %% [markdown]
# r1 says a sale happens before expiry, r3 says it happens at least two
# units after.  Dropping either one restores consistency.

# %%
for keep in (("r1", "r2"), ("r2", "r3")):
    sub = lib.subset(keep)
    r = check_qualitative(sub)
    print(keep, r.verdict.value, {t: str(v) for t, v in r.witness.time_vals.items()})

# %% [markdown]
# The quantitative check is weaker: events may be partly true, so two rules
# that contradict on a shared event can still both hold with positive
# probability.

# %%
contradict = parse_library('shall {object:"door" action:"locked"}; shall !{object:"door" action:"locked"};')
print("qualitative: ", check_qualitative(contradict).verdict.value)
q = check_quantitative(contradict)
print("quantitative:", q.verdict.value, q.witness.event_probs)
# the timing conflict also passes: r1 holds whenever the sale does not
# happen and r3 whenever it does, so each keeps a positive probability
print("quantitative on the timing conflict:", check_quantitative(lib).verdict.value)

# %%
# the same question as an SMT-LIB script for an external solver
print(emit_smtlib(lib))
