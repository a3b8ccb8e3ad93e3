import subprocess
import sys

import pytest

from revgnn.cli import main
from revgnn.synthetic import exposure_benchmark, write_raw

SMALL = ["d_b=4", "d_k=10", "n_layers=2", "n_clusters=3", "n_negatives=8", "eta=4", "hidden1=8",
         "hidden2=4", "batch_size=32", "epochs=2", "history_len=4", "timing=false", "early_stop=false"]


def sets(extra=()):
    out = []
    for item in [*SMALL, *extra]:
        out += ["--set", item]
    return out


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    data = exposure_benchmark(n_scholars=24, n_submissions=30, n_blocks=3, seed=4)
    write_raw(data, root / "edges.tsv", root / "features.tsv")
    assert main(["prepare", "--edges", str(root / "edges.tsv"), "--features", str(root / "features.tsv"),
                 "--seed", "1", "--out", str(root / "prep")]) == 0
    assert main(["train", "--data", str(root / "prep"), "--out", str(root / "m.ckpt"), *sets()]) == 0
    return root


def test_prepare_is_idempotent(workdir, capsys):
    args = ["prepare", "--edges", str(workdir / "edges.tsv"), "--features", str(workdir / "features.tsv"),
            "--seed", "1", "--out", str(workdir / "prep2")]
    assert main(args) == 0
    assert "density=" in capsys.readouterr().out
    for name in ("split.tsv", "features.tsv", "scholar_features.tsv", "stats.tsv"):
        assert (workdir / "prep" / name).read_bytes() == (workdir / "prep2" / name).read_bytes()


def test_train_writes_checkpoint_and_log(workdir):
    log = (workdir / "m.ckpt.log.csv").read_text().splitlines()
    assert log[0] == "epoch,l_beh,l_clus,l_cl,l_sup,total,seconds"
    assert len(log) == 3


def test_training_twice_is_byte_identical(workdir):
    args = ["train", "--data", str(workdir / "prep"), *sets()]
    assert main([*args, "--out", str(workdir / "again.ckpt")]) == 0
    assert (workdir / "again.ckpt").read_bytes() == (workdir / "m.ckpt").read_bytes()
    assert (workdir / "again.ckpt.log.csv").read_bytes() == (workdir / "m.ckpt.log.csv").read_bytes()


def test_eval_emits_four_columns(workdir, capsys):
    report = workdir / "r.csv"
    assert main(["eval", "--checkpoint", str(workdir / "m.ckpt"), "--data", str(workdir / "prep"),
                 "--report", str(report), "--detail", str(workdir / "d.tsv")]) == 0
    lines = report.read_text().splitlines()
    assert lines[0] == "R@20,N@20,HR@20,P@20"
    assert all(0.0 <= float(x) <= 1.0 for x in lines[1].split(","))
    assert "R@20" in capsys.readouterr().out
    first = report.read_bytes()
    main(["eval", "--checkpoint", str(workdir / "m.ckpt"), "--data", str(workdir / "prep"),
          "--report", str(report)])
    assert report.read_bytes() == first


def test_ablate_flag_zeroes_stage2_losses(workdir):
    ck = workdir / "nos2.ckpt"
    assert main(["train", "--data", str(workdir / "prep"), "--out", str(ck), "--ablate", "no-stage2",
                 *sets()]) == 0
    for row in (workdir / "nos2.ckpt.log.csv").read_text().splitlines()[1:]:
        cols = row.split(",")
        assert float(cols[2]) == 0.0 and float(cols[3]) == 0.0


def test_export(workdir):
    out = workdir / "emb.tsv"
    assert main(["export-embeddings", "--checkpoint", str(workdir / "m.ckpt"), "--data", str(workdir / "prep"),
                 "--out", str(out), "--clusters", str(workdir / "cl.tsv"), "--scores", str(workdir / "s.tsv"),
                 "--k", "3"]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "dim=14" and len(lines) == 1 + 24 + 30
    scores = (workdir / "s.tsv").read_text().splitlines()
    assert len(scores) == 3 * 30 and all(len(r.split("\t")) == 3 for r in scores)


def test_ablate_subcommand(workdir):
    out = workdir / "abl"
    assert main(["ablate", "--data", str(workdir / "prep"), *sets(["epochs=1"]), "--variants", "full,-Stage-2",
                 "--seeds", "0,1", "--out", str(out), "--k", "10"]) == 0
    results = (out / "results.csv").read_text().splitlines()
    assert results[0] == "variant,seed,R@10,N@10,HR@10,P@10" and len(results) == 5
    pvals = (out / "pvalues.csv").read_text().splitlines()
    assert pvals[0] == "variant_a,variant_b,metric,U,p" and len(pvals) == 5


def test_dump_config(capsys):
    assert main(["dump-config", "--set", "epochs=9"]) == 0
    assert "epochs = 9" in capsys.readouterr().out


@pytest.mark.parametrize("argv, code", [
    (["dump-config", "--set", "learning_rate=1"], 2),
    (["eval", "--checkpoint", "/nonexistent.ckpt", "--data", "/nonexistent", "--report", "r.csv"], 2),
    (["prepare", "--edges", "/nonexistent", "--features", "/nonexistent", "--out", "x"], 2),
    (["ablate", "--data", "/nonexistent", "--variants", "bogus", "--out", "x"], 2),
])
def test_input_errors_exit_2(argv, code, capsys):
    assert main(argv) == code
    assert capsys.readouterr().err.startswith("revgnn: error:")


def test_mismatched_checkpoint_exits_4(workdir, tmp_path):
    other = exposure_benchmark(n_scholars=24, n_submissions=30, n_blocks=3, seed=9)
    write_raw(other, tmp_path / "e.tsv", tmp_path / "f.tsv")
    main(["prepare", "--edges", str(tmp_path / "e.tsv"), "--features", str(tmp_path / "f.tsv"),
          "--out", str(tmp_path / "prep")])
    assert main(["eval", "--checkpoint", str(workdir / "m.ckpt"), "--data", str(tmp_path / "prep"),
                 "--report", str(tmp_path / "r.csv")]) == 4


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "revgnn", "dump-config"], capture_output=True, text=True)
    assert proc.returncode == 0 and "d_b = 164" in proc.stdout
