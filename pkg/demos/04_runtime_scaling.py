# Runtime scaling: factorial template size, linear channels, the crossover
# -------------------------------------------------------------------------
# Three measurements characterize the cost of feature extraction:
#   1. brute-force time vs template size k — grows with k! (enumeration),
#   2. time vs channel count c — linear (each template is independent),
#   3. brute vs fast on identical inputs — the spectral path wins once k!
#      outruns one cubic eigendecomposition per window.
# Absolute numbers are hardware noise; the shapes are the point.  Records
# are medians of >= 3 repetitions and can be dumped to CSV for plotting.

from isograph import brute_vs_fast, time_vs_c, time_vs_k, write_csv
from isograph.bench import linear_fit_r2

N = 18  # synthetic graph size; windows per graph = (N - k + 1)^2

print("brute-force time vs template size (expect ~factorial growth):")
k_records = time_vs_k(N, [2, 3, 4, 5], c=1, mode="brute", reps=3, seed=0)
prev = None
for r in k_records:
    note = f"  x{r.wall_time_seconds / prev:.1f} vs k-1" if prev else ""
    print(f"  k={r.k}: {r.wall_time_seconds * 1e3:8.1f} ms{note}")
    prev = r.wall_time_seconds

print("\nfast-path time vs template size (polynomial):")
for r in time_vs_k(N, [2, 3, 4, 5], c=1, mode="fast", reps=3, seed=0):
    print(f"  k={r.k}: {r.wall_time_seconds * 1e3:8.1f} ms")

print("\ntime vs channel count (expect a straight line):")
c_records = time_vs_c(N, [1, 2, 3, 4], k=3, mode="brute", reps=3, seed=1)
for r in c_records:
    print(f"  c={r.c}: {r.wall_time_seconds * 1e3:8.1f} ms")
slope, intercept, r2 = linear_fit_r2(
    [r.c for r in c_records], [r.wall_time_seconds for r in c_records]
)
print(f"  least-squares fit: {slope * 1e3:.1f} ms per channel, R^2 = {r2:.4f}")

print("\nbrute vs fast on identical inputs (medians of 3):")
pairs = brute_vs_fast(N, [2, 3, 4, 5], c=1, reps=3, seed=2)
by_k = {}
for r in pairs:
    by_k.setdefault(r.k, {})[r.mode] = r.wall_time_seconds
for k in sorted(by_k):
    b, f = by_k[k]["brute"], by_k[k]["fast"]
    winner = "fast" if f < b else "brute"
    print(f"  k={k}: brute {b * 1e3:7.1f} ms   fast {f * 1e3:7.1f} ms   -> {winner}")

write_csv(k_records + c_records + pairs, "/tmp/demo_bench.csv")
print("\nwrote /tmp/demo_bench.csv (schema: mode,k,c,n,seconds,reps)")
