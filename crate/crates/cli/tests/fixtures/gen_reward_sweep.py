"""Writes reward_sweep.csv: expected pay for games of 0 to 7 minutes.

Pay is written the way a payroll sheet would: dollars, base 0.50, 0.15
per whole minute played up to six, 0.20 more for a resolved emergency.
"""

import csv
from decimal import Decimal

BASE = Decimal("0.50")
PER_MINUTE = Decimal("0.15")
CAP = 6
BONUS = Decimal("0.20")


def pay(played_ms, resolved):
    minutes = min(played_ms // 60000, CAP)
    return BASE + PER_MINUTE * minutes + (BONUS if resolved else 0)


def sweep():
    points = set(range(0, 420001, 5000))
    for k in range(8):
        points.update(p for p in (k * 60000 - 1, k * 60000, k * 60000 + 1) if p >= 0)
    return sorted(points)


with open("reward_sweep.csv", "w", newline="") as f:
    w = csv.writer(f, lineterminator="\n")
    w.writerow(["played_ms", "resolved", "dollars"])
    for ms in sweep():
        for resolved in (0, 1):
            w.writerow([ms, resolved, f"{pay(ms, resolved):.2f}"])
