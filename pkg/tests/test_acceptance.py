"""Acceptance criteria, one test each; every test prints a PASS/FAIL line.

Run standalone with ``python tests/test_acceptance.py`` or through pytest,
which repeats the lines in its terminal summary.
"""
import sys
import time
from pathlib import Path

import numpy as np
import pytest
from scipy import stats

sys.path.insert(0, str(Path(__file__).parent))

from walkforge import algorithms as alg  # noqa: E402
from walkforge import cli  # noqa: E402
from walkforge import engine as eng  # noqa: E402
from walkforge import graph as gr  # noqa: E402
from walkforge import interleave as il  # noqa: E402
from walkforge import sampler as smp  # noqa: E402
from walkforge.engine import QuerySpec  # noqa: E402
from walkforge.rng import RngStream  # noqa: E402
from walkforge.sampler import SamplerKind  # noqa: E402

from conftest import ACCEPTANCE_LINES, freq  # noqa: E402
from oracles import connected_graphs, node2vec_step, undirected  # noqa: E402


def record(n, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] {n:>2}. {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line, flush=True)
    return ok


def llc_bytes():
    try:
        text = Path("/sys/devices/system/cpu/cpu0/cache/index3/size").read_text().strip()
        mult = {"K": 1 << 10, "M": 1 << 20, "G": 1 << 30}.get(text[-1], 1)
        return int(text.rstrip("KMG")) * mult
    except OSError:
        return 32 << 20


def available_memory():
    for line in Path("/proc/meminfo").read_text().splitlines():
        if line.startswith("MemAvailable:"):
            return int(line.split()[1]) << 10
    return 4 << 30


@pytest.fixture(scope="module")
def power_law_1e4():
    g = gr.power_law_graph(10_000, 8, seed=2024)
    return g.with_weights(gr.synthetic_weights(g.edge_count, 2024)).with_labels(
        gr.synthetic_labels(g.edge_count, 5, 2024))


# 1 ----------------------------------------------------------------------

def test_01_sampler_statistical_suite():
    t0 = time.perf_counter()
    rng = np.random.default_rng(20240601)
    worst_linf, worst_p, bad = 0.0, 1.0, []
    for i in range(20):
        n = int(rng.integers(1, 65))
        w = rng.uniform(0, 10, n)
        w[w == 0] = 10.0
        for kind in SamplerKind:
            # NAIVE is only defined for uniform distributions
            ww = np.ones(n) if kind is SamplerKind.NAIVE else w
            p = ww / ww.sum()
            idx = smp.sample(kind, ww, RngStream.from_seed(i, int(kind)), 1_000_000)
            counts = np.bincount(idx, minlength=n)
            linf = np.abs(counts / idx.size - p).max()
            pval = stats.chisquare(counts, p * idx.size).pvalue if n > 1 else 1.0
            worst_linf, worst_p = max(worst_linf, linf), min(worst_p, pval)
            if not (linf < 0.01 and pval > 1e-4):
                bad.append((i, kind.name, linf, pval))
    secs = time.perf_counter() - t0
    ok = not bad and secs < 60
    record(1, "sampler statistical suite", ok,
           f"100 cases x 1e6 draws, worst Linf={worst_linf:.4f} (<0.01), "
           f"min chi2 p={worst_p:.2e} (>1e-4), {secs:.1f}s (<60s)")
    assert ok, bad


# 2 ----------------------------------------------------------------------

def test_02_rej_trial_expectation():
    w = [1, 1, 1, 9]
    expect = len(w) * max(w) / sum(w)
    _, trials = smp.rej_generate(w, smp.rej_init(w).p_star, RngStream.from_seed(2, 0),
                                 size=100_000)
    mean = trials.mean()
    ok = expect == 3.0 and abs(mean - expect) <= 0.05 * expect
    record(2, "REJ trial expectation", ok, f"mean trials {mean:.4f} vs 3.0 +-5%")
    assert ok


# 3 ----------------------------------------------------------------------

def _programs(g, kind):
    progs = {"ppr": alg.ppr_program(0.2, kind),
             "node2vec": alg.node2vec_program(alg.Node2VecParams(2, 0.5, 80), sampler=kind),
             "metapath": alg.metapath_program(alg.MetaPathSchema.random(g.label_set, 5, 1),
                                              sampler=kind)}
    if kind is SamplerKind.NAIVE:
        # NAIVE needs an unbiased program; the uniform walk stands in for DeepWalk
        progs["deepwalk"] = alg.uniform_program(80)
        del progs["node2vec"], progs["metapath"]
    else:
        progs["deepwalk"] = alg.deepwalk_program(80, weighted=True, sampler=kind)
    return progs


def test_03_interleaved_equals_sequential(power_law_1e4, tmp_path):
    g = power_law_1e4
    spec = QuerySpec.one_per_vertex()
    t0 = time.perf_counter()
    mismatches, combos = [], 0
    for kind in SamplerKind:
        for name, prog in _programs(g, kind).items():
            blobs = []
            for interleave, threads in ((False, 1), (True, 1), (True, 8)):
                ws = il.run(g, spec, prog, threads=threads, seed=77, interleave=interleave)
                out = tmp_path / f"{kind.name}-{name}-{interleave}-{threads}.txt"
                cli.write_walkset(ws, out)
                blobs.append(out.read_bytes())
                out.unlink()
            combos += 1
            if any(b != blobs[0] for b in blobs[1:]):
                mismatches.append(f"{kind.name}/{name}")
    secs = time.perf_counter() - t0
    ok = not mismatches and secs < 120
    record(3, "interleaved == sequential (files, threads 1 vs 8)", ok,
           f"{combos} sampler x program combos on V=10^4 power-law, 10^4 queries, "
           f"{len(mismatches)} mismatches, {secs:.1f}s (<120s)")
    assert ok, mismatches


# 4 ----------------------------------------------------------------------

def test_04_static_preprocessing_equivalence(power_law_1e4, tmp_path):
    g = power_law_1e4
    spec = QuerySpec.one_per_vertex()
    same = []
    for kind in (SamplerKind.ITS, SamplerKind.ALIAS, SamplerKind.REJ):
        prog = alg.deepwalk_program(80, weighted=True, sampler=kind)
        files = []
        for pre in (True, False):
            ws = eng.run_sequential(g, spec, prog, seed=4, preprocess=pre)
            cli.write_walkset(ws, tmp_path / f"{kind.name}{pre}.txt")
            files.append((tmp_path / f"{kind.name}{pre}.txt").read_bytes())
        same.append(files[0] == files[1])
    ok = all(same)
    record(4, "static preprocessing == per-step gather", ok,
           f"DeepWalk ITS/ALIAS/REJ byte-identical: {same}")
    assert ok


# 5 ----------------------------------------------------------------------

def test_05_ppr_mean_length(power_law_1e4):
    g = power_law_1e4
    src = int(np.argmax(g.degrees))
    t0 = time.perf_counter()
    ws = eng.run_sequential(g, QuerySpec.from_source(src, 1_000_000), alg.ppr_program(0.2),
                            seed=5)
    secs = time.perf_counter() - t0
    ok = 4.9 <= ws.mean_steps <= 5.1 and secs < 60
    record(5, "PPR mean length", ok,
           f"mean steps {ws.mean_steps:.4f} over 10^6 queries (in [4.9, 5.1]), {secs:.1f}s")
    assert ok


# 6 ----------------------------------------------------------------------

def test_06_node2vec_brute_force_oracle():
    a, b = 2.0, 0.5
    t0 = time.perf_counter()
    graphs = list(connected_graphs(4))
    worst, pairs, min_trials = 0.0, 0, None
    for kind in (SamplerKind.O_REJ, SamplerKind.ITS, SamplerKind.ALIAS, SamplerKind.REJ):
        for gi, und in enumerate(graphs):
            g = undirected(4, und)
            prog = alg.node2vec_program(alg.Node2VecParams(a, b, 3), sampler=kind)
            for prev in range(4):
                n = 110_000 * g.degree(prev)
                ws = eng.run_sequential(g, QuerySpec.from_source(prev, n), prog,
                                        seed=1000 * gi + prev)
                paths = ws.vertices.reshape(-1, 3)
                for cur in g.neighbors_of(prev):
                    nxt = paths[paths[:, 1] == cur, 2]
                    exact = node2vec_step(4, und, prev, int(cur), a, b)
                    f = freq(nxt, 4)
                    worst = max(worst, max(abs(f[v] - exact.get(v, 0.0)) for v in range(4)))
                    min_trials = nxt.size if min_trials is None else min(min_trials, nxt.size)
                    pairs += 1
    secs = time.perf_counter() - t0
    ok = len(graphs) == 38 and worst < 0.01 and min_trials >= 100_000 and secs < 300
    record(6, "Node2Vec vs brute-force transition oracle", ok,
           f"{len(graphs)} connected 4-vertex graphs, {pairs} (prev, cur) cases over "
           f"O_REJ/ITS/ALIAS/REJ, >= {min_trials} trials each, max |err|={worst:.4f} (<0.01), "
           f"{secs:.1f}s (<300s)")
    assert ok


# 7 ----------------------------------------------------------------------

def test_07_metapath_label_soundness(power_law_1e4):
    g = power_law_1e4
    schema = alg.MetaPathSchema.random(g.label_set, 5, seed=7)
    t0 = time.perf_counter()
    ws = eng.run_sequential(g, QuerySpec.one_per_vertex(10), alg.metapath_program(schema),
                            seed=7)
    n, L = g.vertex_count, np.array(schema.labels)
    src = np.repeat(np.arange(n), g.degrees)
    edge_keys = np.unique((src * n + g.neighbors.astype(np.int64)) * 5 + g.labels)
    out_keys = np.unique(src * 5 + g.labels)
    lengths = ws.lengths
    starts = ws.offsets[:-1]
    mismatched = 0
    for i in range(len(schema)):
        has = lengths > i + 1
        u = ws.vertices[starts[has] + i]
        v = ws.vertices[starts[has] + i + 1]
        mismatched += int(np.count_nonzero(~np.isin((u * n + v) * 5 + L[i], edge_keys)))
    dead = ws.status == eng.DEAD_END
    last = ws.vertices[ws.offsets[1:] - 1]
    need = L[np.minimum(lengths - 1, len(schema) - 1)]
    # a dead end must have no out-edge with the label required next
    wrong_dead = int(np.count_nonzero(np.isin(last[dead] * 5 + need[dead], out_keys)))
    # a completed walk used the full schema; an unfinished one must be flagged
    wrong_complete = int(np.count_nonzero(lengths[~dead] != len(schema) + 1))
    secs = time.perf_counter() - t0
    ok = (len(ws) == 100_000 and mismatched == 0 and wrong_dead == 0 and wrong_complete == 0
          and dead.any() and secs < 60)
    record(7, "MetaPath label soundness", ok,
           f"10^5 walks, {mismatched} mismatched edges, {int(dead.sum())} dead ends "
           f"({wrong_dead} wrongly flagged, {wrong_complete} unflagged), {secs:.1f}s")
    assert ok


# 8, 9 -------------------------------------------------------------------

@pytest.fixture(scope="module")
def big_graph():
    """Largest power-law graph toward 8x LLC that fits the memory of this machine."""
    llc = llc_bytes()
    target = 8 * llc
    # generation peaks around 5x the final CSR size; preprocessing adds 16 B/edge
    feasible = available_memory() // 6
    size = min(target, feasible)
    n = max(int(size // 104), 100_000)
    g = gr.power_law_graph(n, 8, seed=99)
    g = g.with_weights(gr.synthetic_weights(g.edge_count, 99))
    return g, llc, target


def test_08_scalability(big_graph):
    g, llc, _ = big_graph
    cores = cli.available_cores()
    prog = alg.deepwalk_program(10, weighted=True)
    spec = np.arange(0, g.vertex_count, max(1, g.vertex_count // 500_000), dtype=np.int64)
    t0 = time.perf_counter()
    base = il.run_interleaved(g, spec, prog, threads=1).throughput
    ratios = {}
    for t in range(1, min(8, cores) + 1):
        ratios[t] = il.run_interleaved(g, spec, prog, threads=t).throughput / base
    secs = time.perf_counter() - t0
    ok = g.nbytes > llc and all(r >= 0.7 * t for t, r in ratios.items()) and secs < 300
    detail = ", ".join(f"t={t}: {r:.2f}x" for t, r in ratios.items())
    record(8, "scalability", ok,
           f"graph {g.nbytes / 2**20:.0f} MiB vs LLC {llc / 2**20:.0f} MiB, {cores} core(s) "
           f"available so t ranges over 1..{min(8, cores)}; {detail} (need >= 0.7t), "
           f"{secs:.1f}s")
    assert ok


def test_09_interleaving_speedup(big_graph):
    g, llc, target = big_graph
    prog = alg.deepwalk_program(10, weighted=True)
    spec = np.arange(0, g.vertex_count, max(1, g.vertex_count // 1_000_000), dtype=np.int64)
    best = {}
    for k, kp in ((1, 1), (64, 32), (1, 1), (64, 32)):
        ws = il.run_interleaved(g, spec, prog, seed=9, k=k, k_prime=kp)
        best[k] = max(best.get(k, 0.0), ws.throughput)
    speedup = best[64] / best[1]
    big_enough = g.nbytes >= target
    ok = big_enough and speedup >= 1.2
    detail = (f"DeepWalk/ALIAS (64,32) vs k=1: {speedup:.2f}x (need >= 1.2x) on a "
              f"{g.nbytes / 2**20:.0f} MiB graph = {g.nbytes / llc:.1f}x LLC")
    if not big_enough:
        detail += (f"; required >= 8x LLC ({target / 2**20:.0f} MiB) does not fit in "
                   f"{available_memory() / 2**30:.1f} GiB available memory")
    record(9, "interleaving speedup", ok, detail)
    if not big_enough:
        pytest.xfail("graph of 8x LLC cannot be built on this machine; see report line")
    assert ok


# 10 ---------------------------------------------------------------------

def test_10_tuner(tmp_path, capsys):
    g = gr.power_law_graph(125_000, 8, seed=10)
    path = tmp_path / "g.wfg"
    gr.write_binary(g, path)
    t0 = time.perf_counter()
    code = cli.main(["tune", str(path), "--threads", "1"])
    out = capsys.readouterr().out
    secs = time.perf_counter() - t0
    phase1 = out.split("# phase 2")[0]
    ks = [int(line.split("\t")[0]) for line in phase1.splitlines() if line[:1].isdigit()]
    last = out.strip().splitlines()[-1].split()
    k_star, kp_star = int(last[0].split("=")[1]), int(last[1].split("=")[1])
    ok = (code == 0 and g.edge_count >= 10**6 and ks == [1 << i for i in range(11)]
          and kp_star <= k_star and "budget exhausted" not in out and secs < 300)
    record(10, "ring-size tuner", ok,
           f"E={g.edge_count}, k grid {ks[0]}..{ks[-1]} ({len(ks)} rows), "
           f"k*={k_star} k'*={kp_star}, {secs:.1f}s (<300s, default budget 240s)")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
