"""Merging events that mean the same thing (or the opposite) before checking.

Run from the repository root:  python3 demos/03_abstraction.py
"""
# %%
from pathlib import Path

from horae import (LexicalProvider, TableProvider, abstract_events, apply_abstraction, check_qualitative,
                   parse_library, print_library)

DATA = Path(__file__).parent / "data"

lib = parse_library((DATA / "leave_policy.hor").read_text())
for eid, ev in lib.events.items():
    print(f"{eid:>4}: {ev.text}")

# %% [markdown]
# Twelve events, but several describe the same fact in different words,
# and some describe its negation.  A judgment table (as a sentence
# similarity model would produce) links them.

# %%
result = abstract_events(lib, TableProvider.from_file(DATA / "leave_pairs.json"))
print(result.class_count, "classes")
for rep, members in result.classes().items():
    print("  " + " = ".join(e if p > 0 else "!" + e for e, p in members))

# %%
merged = apply_abstraction(lib, result)
print(print_library(merged))
print("before merging:", check_qualitative(lib).verdict.value)
print("after merging: ", check_qualitative(lib, result).verdict.value)

# %% [markdown]
# The built-in lexical provider only links near-identical wording, so on
# this library it finds far fewer links than the table.

# %%
print("lexical provider:", abstract_events(lib, LexicalProvider()).class_count, "classes")
