"""
Benchmark protocols
===================

The selector against uniform spacing, the best of 100 random subsets and
brute force on a pinned corpus of short sequences, half of which change
dynamics in the middle.  Reports can be written as JSON and CSV.
"""

import tempfile

from dynkeys import bench

d, corpus = bench.pinned_table2()
rep = bench.bench_table2(corpus, d)
for key, val in rep["summary"].items():
    print(f"{key:32s} {val}")

# skeleton corpora additionally get PCK after interpolation
d, skel = bench.pinned_table2(num_joints=4)
rep = bench.bench_table2(skel, d, n_random=20)
print({k: round(v, 1) for k, v in rep["summary"].items() if k.endswith("_pck")})

with tempfile.TemporaryDirectory() as out:
    print([p.name for p in bench.write_report(rep, out, "table2")])
