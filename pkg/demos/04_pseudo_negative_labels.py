"""
Cluster ids as negative labels
==============================

Stage 2 softly assigns every node to C centers.  The argmax becomes a
pseudo label, and negatives for an anchor are only ever drawn from other
labels, so a scholar who merely never saw a submission in the same
research area is not pushed away from it.
"""
import numpy as np

from revgnn.config import TrainConfig
from revgnn.stage2 import cluster_loss, sample_negatives, soft_assign, target_distribution
from revgnn.synthetic import exposure_benchmark
from revgnn.trainer import Trainer

rng = np.random.default_rng(0)

# Soft assignment, sharpened target, and the KL between them
h = rng.normal(size=(6, 2))
centers = np.array([[1.0, 0.0], [-1.0, 0.0]])
q = soft_assign(h, centers).data
p = target_distribution(q)
print("Q\n", q.round(3))
print("P (sharper)\n", p.round(3))
print("KL(P || Q) =", cluster_loss(p, q).item(), "  KL(Q || Q) =", cluster_loss(q, q).item())

# Negatives for anchors 0 and 1 come only from the other cluster
hard = np.array([0, 0, 0, 1, 1, 1])
index, valid = sample_negatives([0, 3], hard, 4, rng)
print("negatives of 0:", index[0], " negatives of 3:", index[1])

# The same rule holds inside a real training run
data = exposure_benchmark(seed=0)
trainer = Trainer(TrainConfig(d_b=8, d_k=10, eta=4, hidden1=16, hidden2=8, n_clusters=6,
                              n_negatives=32, batch_size=32, early_stop=False), data)
pairs = clashes = 0
for _ in range(30):
    if trainer.run_steps(1):
        trainer.finish_epoch(0.0)
    anchors, index, valid = trainer.last_negatives
    a = np.repeat(anchors, index.shape[1]).reshape(index.shape)[valid]
    pairs += len(a)
    clashes += int(np.sum(trainer.cluster.hard[a] == trainer.cluster.hard[index[valid]]))
print(f"{pairs} sampled pairs, {clashes} inside the anchor's own cluster")
print("cluster sizes:", np.bincount(trainer.cluster.hard, minlength=6))
