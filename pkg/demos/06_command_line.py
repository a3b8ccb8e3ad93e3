"""
The command-line pipeline
=========================

The same workflow through ``revgnn`` subcommands: prepare, train, eval,
export.  Each call here is equivalent to running ``revgnn ...`` in a shell.
"""
import sys
from pathlib import Path

from revgnn.cli import main
from revgnn.synthetic import exposure_benchmark, write_raw

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_output") / "cli"
out.mkdir(parents=True, exist_ok=True)
write_raw(exposure_benchmark(seed=1), out / "edges.tsv", out / "features.tsv")

(out / "small.cfg").write_text(
    "# a desk-sized model for the 10-dimensional synthetic features\n"
    "d_b = 16\nd_k = 10\neta = 8\nhidden1 = 64\nhidden2 = 32\nn_clusters = 6\n"
    "n_negatives = 32\nbatch_size = 32\nepochs = 20\nearly_stop = false\ntiming = false\n")


def run(*argv):
    argv = [str(a) for a in argv]
    print("$ revgnn", " ".join(argv))
    code = main(argv)
    if code:
        raise SystemExit(code)


run("prepare", "--edges", out / "edges.tsv", "--features", out / "features.tsv", "--out", out / "data")
run("dump-config", "--config", out / "small.cfg", "--set", "epochs=5")
run("train", "--config", out / "small.cfg", "--data", out / "data", "--out", out / "model.ckpt")
run("eval", "--checkpoint", out / "model.ckpt", "--data", out / "data", "--k", "20",
    "--report", out / "report.csv", "--detail", out / "detail.tsv", "--plot", out / "report.svg")
run("export-embeddings", "--checkpoint", out / "model.ckpt", "--data", out / "data",
    "--out", out / "embeddings.tsv", "--clusters", out / "clusters.tsv",
    "--scores", out / "top5.tsv", "--k", "5")
print((out / "top5.tsv").read_text().splitlines()[:5])

# Errors map to exit codes: 2 bad input, 3 numerical abort, 4 checkpoint for other data
print("unknown key ->", main(["dump-config", "--set", "learning_rate=1"]))
