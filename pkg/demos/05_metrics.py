"""Scoring extracted events against a gold list, and annotator agreement.

Run from the repository root:  python3 demos/05_metrics.py
"""
# %%
import numpy as np

from horae import event_metrics, fleiss_kappa

gold = ["The collected information include user behavior data.",
        "The collected information include user preference data.",
        "The collected information include user transaction data."]
# a weaker extractor merged two events and reworded one
generated = ["The collected information include user behavior and preference data.",
             "Collected information includes transaction data of users."]

# %%
report = event_metrics(generated, gold)
print(f"precision {report.precision:.3f}  recall {report.recall:.3f}  f1 {report.f1:.3f}")
for i, j, s in report.matched_pairs:
    print(f"  generated {i} -> gold {j}: {s:.3f}")

# %%
# three annotators labelling five records as correct / incorrect
ratings = np.array([[3, 0], [3, 0], [2, 1], [0, 3], [3, 0]])
print("Fleiss' kappa:", round(fleiss_kappa(ratings), 4))
