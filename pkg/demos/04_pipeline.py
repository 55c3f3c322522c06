"""Natural-language rule to rule-language text, using recorded backend answers.

Run from the repository root:  python3 demos/04_pipeline.py
"""
# %%
from pathlib import Path

from horae import MockBackend, convert
from horae.pipeline import event_prompt

DATA = Path(__file__).parent / "data"

rule = ("The collected information should include user behavior data, user preference data, "
        "or user transaction data.")
backend = MockBackend.from_file(DATA / "r3_mock.json")

# %%
# first of the three prompts the backend sees
print(event_prompt(rule))

# %%
result = convert(rule, backend)
print("events:  ", [e.raw_text for e in result.events])
print("relation:", result.relation)
print("patterns:", [p.value for p in result.patterns])
print("rule:    ", result.text)

# %%
print(result.to_json())
