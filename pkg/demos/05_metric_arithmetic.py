"""Rebuild a seven-column result row from its confusion counts.

With 40 tinnitus and 40 control signals, a TPR of 0.725 and a TNR of 0.750
pin the confusion matrix down completely.
"""
from smeta.evaluation import METRIC_LABELS, METRIC_NAMES, Confusion, fmt, metrics

c = Confusion(tp=29, fn=11, tn=30, fp=10)
m = metrics(c)
print(" ".join(f"{METRIC_LABELS[k]:>6}" for k in METRIC_NAMES))
print(" ".join(f"{fmt(m[k]):>6}" for k in METRIC_NAMES))
print(f"exact: NPV = 30/41 = {30 / 41:.5f}, PPV = 29/39 = {29 / 39:.5f}, Acc = 59/80 = {59 / 80}")

# a degenerate model that never predicts tinnitus: PPV is 0/0
print({k: fmt(v) for k, v in metrics(Confusion(tn=40, fn=40)).items()})
