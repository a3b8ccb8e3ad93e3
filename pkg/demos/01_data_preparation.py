"""
Preparing a review graph
========================

Edge and feature files go in, a prepared directory comes out: interned ids,
a one-held-out-per-submission split, pooled scholar features and summary
statistics.
"""
import sys
from pathlib import Path

from revgnn.graphstore import compute_stats, load_edges, load_prepared, prepare
from revgnn.synthetic import exposure_benchmark, write_raw

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_output") / "prepare"
out.mkdir(parents=True, exist_ok=True)

# Write a synthetic graph in the plain-text exchange format
write_raw(exposure_benchmark(seed=0), out / "edges.tsv", out / "features.tsv")
print((out / "edges.tsv").read_text().splitlines()[:3])

# Loading collapses duplicate lines and keeps first-seen id order
graph = load_edges(out / "edges.tsv")
stats = compute_stats(graph)
print(f"{stats.scholars} scholars, {stats.submissions} submissions, "
      f"{stats.reviews} reviews, density {stats.density:.3e}")

# Density is reviews / (scholars x submissions); the two public datasets:
for counts in [(6711, 4000, 10799), (9560, 8132, 19063)]:
    print(counts, f"{stats.from_counts(*counts).density:.2e}")

# prepare() holds out one reviewer for every submission with two or more
data = prepare(out / "edges.tsv", out / "features.tsv", seed=0, out_dir=out / "prepared")
print(f"train edges {len(data.graph.train_edges)}, test edges {len(data.graph.test_edges)}")

# Scholar features are the mean of their training submissions' features
print("scholar 0 features:", data.features.scholar[0].round(3))

# The directory reloads to the same content hash
assert load_prepared(out / "prepared").data_hash == data.data_hash
print("data hash", data.data_hash)
