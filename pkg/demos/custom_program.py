"""A user-defined walk: prefer heavier edges, stop at a weight budget.

Weight and update functions are compiled once and share a fixed
signature, so the same program runs on every sampler and in both the
sequential and interleaved engines.
"""
import walkforge as wf


@wf.weight_function
def squared_weight(G, P, path, plen, state, v, e):
    return G[2][e] * G[2][e]


@wf.update_function
def budget_spent(G, P, path, plen, state, e, rng, q):
    state[0] += G[2][e]
    return state[0] >= P[0][0] or plen >= P[1][0]


g = wf.power_law_graph(5000, 8, seed=11)
g = g.with_weights(wf.synthetic_weights(g.edge_count, 11))

prog = wf.WalkProgram(squared_weight, budget_spent, wf.WalkerType.STATIC, "alias",
                      max_weight=lambda g: g.max_weight ** 2, fparams=[20.0],
                      iparams=[64], state_width=1, max_length=64, name="heavy-budget")

spec = wf.QuerySpec.one_per_vertex(20)
seq = wf.run(g, spec, prog, interleave=False, seed=3)
for kind in ("its", "alias", "rej"):
    wf.run(g, wf.QuerySpec.from_source(0, 10), prog.with_sampler(kind))  # warm up
    ws = wf.run(g, spec, prog.with_sampler(kind), seed=3)
    print(f"{kind:6s} mean length {ws.mean_steps:.3f}  {ws.throughput / 1e6:.2f} M steps/s")
print("interleaved alias == sequential alias:", seq.same_walks(wf.run(g, spec, prog, seed=3)))
