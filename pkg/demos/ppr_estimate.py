"""Monte Carlo personalized PageRank from a single source.

Each walk stops after a move with probability alpha; the share of walks
ending at a vertex estimates its PPR score. We compare against power
iteration on the same graph.
"""
import numpy as np

import walkforge as wf

alpha = 0.2
g = wf.power_law_graph(2000, 6, seed=7)
source = int(np.argmax(g.degrees))

ws = wf.run(g, wf.QuerySpec.from_source(source, 200_000), wf.ppr_program(alpha), seed=1)
ends = np.array([p[-1] for p in ws.paths()])
mc = np.bincount(ends, minlength=g.vertex_count) / ends.size

# power iteration: the walk moves at least once before the coin is flipped
deg = g.degrees.astype(float)
P = np.zeros((g.vertex_count, g.vertex_count))
for v in range(g.vertex_count):
    nb = g.neighbors_of(v)
    if nb.size:
        np.add.at(P[v], nb, 1.0 / deg[v])
x = np.zeros(g.vertex_count)
x[source] = 1.0
x = x @ P
exact = np.zeros_like(x)
for _ in range(200):
    exact += alpha * x
    x = (1 - alpha) * (x @ P)

top = np.argsort(-exact)[:5]
print(f"mean walk length {ws.mean_steps:.3f} steps (expected {1 / alpha:.1f})")
print("vertex   exact     estimate")
for v in top:
    print(f"{v:6d}  {exact[v]:.5f}   {mc[v]:.5f}")
print(f"L1 error {np.abs(exact - mc).sum():.4f}")
