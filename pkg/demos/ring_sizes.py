"""How throughput responds to the number of walkers interleaved per thread.

On graphs much larger than the last-level cache, a few dozen walkers in
flight hide most of the memory latency. On small graphs the gain is
mostly gone, since the data is already cached.
"""
import time

import walkforge as wf

g = wf.power_law_graph(1_000_000, 8, seed=5)
prog = wf.uniform_program(20)
spec = wf.QuerySpec.one_per_vertex()

wf.run(g, spec, prog, k=4, k_prime=4)  # compile
for k in (1, 4, 16, 64, 256):
    t = time.perf_counter()
    ws = wf.run(g, spec, prog, k=k, k_prime=min(k, 32))
    dt = time.perf_counter() - t
    print(f"k={k:4d}  {ws.total_steps / dt / 1e6:6.2f} M steps/s")
