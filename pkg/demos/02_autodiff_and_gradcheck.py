"""
Reverse-mode gradients and finite differences
=============================================

Every learnable tensor is trained through the small autodiff core in
``revgnn.numcore``.  Here we build a graph-convolution objective by hand,
take its gradient, and compare against central differences.
"""
import numpy as np

from revgnn import numcore as nc
from revgnn.numcore import Tensor, grad_check, normalize_adjacency

rng = np.random.default_rng(0)

# Symmetric-normalized adjacency with self loops for a 5-node path
adj = normalize_adjacency([(0, 1), (1, 2), (2, 3), (3, 4)], 5)
print(np.round(adj.todense(), 3))

x = Tensor(rng.normal(size=(5, 3)), requires_grad=True)
w = Tensor(rng.normal(size=(3, 2)), requires_grad=True)


def objective():
    h = nc.matmul(nc.spmm(adj, x), w)
    return nc.mean(nc.sigmoid(h))


loss = objective()
gx, gw = nc.backward(loss, [x, w])
print("loss", loss.item())
print("dL/dw\n", gw)

# Worst relative disagreement with central differences
print("gradcheck error", grad_check(objective, [x, w]))

# Under no_grad nothing is recorded, so nothing can be differentiated
with nc.no_grad():
    print("tracked:", objective().requires_grad)
