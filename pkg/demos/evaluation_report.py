"""
Boundary precision, recall and F
================================

Only the B tag counts: a hit is a position where both prediction and
reference say B. Percentages are rounded half-up to two decimals.
"""

from prosodynn.evaluation import PrfMetrics, f_score, format_report, percent, score_prf

gold = [["NB", "B", "NB", "B", "O"], ["B", "NB", "B"]]
pred = [["NB", "B", "B", "NB", "O"], ["B", "NB", "B"]]
m = score_prf(pred, gold)
print("tp, fp, fn =", m.tp, m.fp, m.fn)
print("P", percent(m.precision), "R", percent(m.recall), "F", percent(m.f_score))

# F is the harmonic mean of P and R, so it can be recomputed from any P/R pair
for p, r in [(96.02, 96.69), (82.50, 86.75), (83.41, 83.68)]:
    print(f"P={p} R={r} -> F={percent(f_score(p / 100, r / 100))}")

print(format_report({"PW": m, "PPH": PrfMetrics(3, 1, 2), "IPH": PrfMetrics(0, 0, 4)}))
