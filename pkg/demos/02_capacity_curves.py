"""How much Byzantine databases cost.

Capacity against N for T=2, M=3 and B = 0, 1, 2, then the large-N picture
where a fixed fraction gamma of the databases is Byzantine.  Writes a CSV
next to the script if asked (pass --csv).
"""

import sys
from pathlib import Path

from bpir.harness import sweep_capacity, sweep_gamma, sweep_to_csv

rows = sweep_capacity(T=2, M=3, Bs=[0, 1, 2], Ns=range(5, 21))

print(" N   " + "   ".join(f"B={b}     " for b in (0, 1, 2)))
for N in range(5, 21):
    cells = []
    for B in (0, 1, 2):
        r = next(r for r in rows if r["N"] == N and r["B"] == B)
        tag = "" if r["regime"] == "FULL" else "*"
        cells.append(f"{float(r['C']):.4f}{tag:1s}   ")
    print(f"{N:2d}   " + "".join(cells))
print("* trivial regime: download 2B+1 full copies")

print()
print("gamma   B     C(N=1000)   1-2gamma")
for r in sweep_gamma([k / 20 for k in range(10)], N=1000):
    print(f"{float(r['gamma']):.2f}   {r['B']:3d}   {float(r['C']):.6f}    {float(r['limit']):.2f}")

if "--csv" in sys.argv:
    out = Path(__file__).with_name("capacity_curves.csv")
    out.write_text(sweep_to_csv(rows))
    print("wrote", out)
