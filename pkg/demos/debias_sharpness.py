"""Bias of the plain and second-order corrected sharpness ratio at one location.

The sharpness term estimates a squared conditional mean with a ratio of
U-statistics, which is biased at order 1/n.  The second-order correction
removes the leading term.  Both are averaged over many small samples and
compared with a large-sample reference.

    python3 demos/debias_sharpness.py
"""

from ecekde import debias_study

res = debias_study([32, 64, 128, 256], reps=2000, h=0.5, location=0.17, seed=0,
                   reference_n=10**6)
print(f"reference value: {res.rows[0]['reference']:.5f}")
print(f"{'n':>6} {'mode':>13} {'|bias|':>10} {'stderr':>10}")
for r in res.rows:
    print(f"{r['n']:>6} {r['estimator']:>13} {r['bias']:>10.2e} {r['stderr']:>10.2e}")
for name, (slope, err) in res.slopes.items():
    print(f"log-log bias slope, {name}: {slope:.2f} +/- {err:.2f}")
