import gc

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from walkforge import algorithms as alg
from walkforge import engine as eng
from walkforge import graph as gr
from walkforge.engine import QuerySpec, WalkerType, WalkProgram
from walkforge.errors import ConfigurationError, ProgramContractError
from walkforge.sampler import SamplerKind

from conftest import freq

TABLE_SAMPLERS = (SamplerKind.ITS, SamplerKind.ALIAS, SamplerKind.REJ)


def star_out(weights):
    """Vertex 0 with one out-edge per weight to leaves 1..n; leaves point back."""
    n = len(weights)
    src = [0] * n + list(range(1, n + 1))
    dst = list(range(1, n + 1)) + [0] * n
    return gr.from_edges(src, dst, n + 1, weights=list(weights) + [1.0] * n)


def assert_adjacent(g, ws):
    for q in range(len(ws)):
        p = ws.path(q)
        for u, v in zip(p[:-1], p[1:]):
            assert v in g.neighbors_of(int(u))


def test_default_sampler():
    assert eng.default_sampler(WalkerType.UNBIASED) is SamplerKind.NAIVE
    assert eng.default_sampler(WalkerType.STATIC) is SamplerKind.ALIAS
    assert eng.default_sampler(WalkerType.DYNAMIC) is SamplerKind.ITS
    assert alg.deepwalk_program(5, sampler="its").sampling_method is SamplerKind.ITS


def test_configuration_errors(triangle):
    with pytest.raises(ConfigurationError, match="NAIVE"):
        eng.validate(triangle, alg.deepwalk_program(5, sampler="naive"))
    prog = WalkProgram(alg.unit_weight, alg.length_reached, "dynamic", "o_rej",
                       iparams=[5])
    with pytest.raises(ConfigurationError, match="MaxWeight"):
        eng.run_sequential(triangle, QuerySpec.one_per_vertex(), prog)
    with pytest.raises(ConfigurationError):
        alg.deepwalk_program(5, weighted=True).check_graph(triangle)
    with pytest.raises(ConfigurationError, match="out of range"):
        eng.run_sequential(triangle, QuerySpec.from_source(7, 1), alg.ppr_program())


def test_gather_examples(small_power_law):
    g = small_power_law
    v = int(np.argmax(g.degrees))
    w = eng.Walker.start(v, 0, 1)
    ctx = eng.gather(g, w, alg.deepwalk_program(10, weighted=True))
    lo, hi = g.offsets[v], g.offsets[v + 1]
    assert np.array_equal(ctx.weights, g.weights[lo:hi])
    ctx = eng.gather(g, w, alg.deepwalk_program(10, sampler="its"))
    assert ctx.state.cumulative.tolist() == list(range(1, hi - lo + 1))
    schema = alg.MetaPathSchema((2, 0, 1))
    ctx = eng.gather(g, w, alg.metapath_program(schema))
    assert np.array_equal(ctx.weights, (g.labels[lo:hi] == 2).astype(float))


def test_move_single_edge():
    g = gr.from_edges([0, 1], [1, 0], 2)
    w = eng.Walker.start(0, 0, 3)
    e = eng.move(g, w, None, alg.ppr_program())
    assert e == 0 and w.path == [0, 1] and w.rng.draws == 1


def test_alias_first_step_frequencies():
    g = star_out([1, 2, 3])
    prog = alg.deepwalk_program(2, weighted=True, sampler="alias")
    ws = eng.run_sequential(g, QuerySpec.from_source(0, 1_000_000), prog, seed=5)
    f = freq(ws.vertices[1::2] - 1, 3)
    assert np.abs(f - [1 / 6, 1 / 3, 1 / 2]).max() < 0.01


def test_move_matches_generate(triangle):
    g = star_out([1, 2, 3])
    prog = alg.deepwalk_program(2, weighted=True, sampler="alias")
    counts = np.zeros(3)
    for q in range(2000):
        w = eng.Walker.start(0, q, 1)
        e = eng.move(g, w, eng.gather(g, w, prog), prog)
        counts[e] += 1
    assert np.abs(counts / 2000 - [1 / 6, 1 / 3, 1 / 2]).max() < 0.05


def test_orej_contract_violation():
    g = star_out([1, 5, 1])
    prog = alg.deepwalk_program(2, weighted=True, sampler="o_rej")
    low = WalkProgram(prog.weight, prog.update, "static", "o_rej", max_weight=lambda g: 2.0,
                      iparams=prog.iparams, max_length=2)
    with pytest.raises(ProgramContractError, match="MaxWeight"):
        eng.run_sequential(g, QuerySpec.from_source(0, 2000), low, preprocess=False)


def test_orej_accepted_edges_within_bound(small_power_law):
    g = small_power_law
    prog = alg.node2vec_program(alg.Node2VecParams(2, 0.5, 10), weighted=True)
    ws = eng.run_sequential(g, QuerySpec.one_per_vertex(), prog, seed=1)
    bound = prog.max_weight(g)
    for q in range(0, len(ws), 37):
        p = ws.path(q)
        for i in range(1, len(p)):
            e = g.offsets[p[i - 1]] + np.searchsorted(g.neighbors_of(int(p[i - 1])), p[i])
            assert g.weights[e] * 2.0 <= bound * (1 + 1e-12)


def test_preprocess_examples(triangle):
    t = eng.preprocess_static(triangle, alg.deepwalk_program(5, sampler="its"))
    for v in range(3):
        assert t.state_for(v).cumulative.tolist() == [1.0]
    g = gr.power_law_graph(300, 5, seed=1)
    t = eng.preprocess_static(g, alg.deepwalk_program(5))
    assert np.all(t.prob == 1.0)
    assert eng.preprocess_static(g, alg.ppr_program()) is None
    iso = gr.from_edges([0], [1], 3)
    assert eng.preprocess_static(iso, alg.deepwalk_program(5)).state_for(2) is None


@pytest.mark.parametrize("kind", TABLE_SAMPLERS)
def test_static_dynamic_flow_equivalence(small_power_law, kind):
    prog = alg.deepwalk_program(20, weighted=True, sampler=kind)
    spec = QuerySpec.one_per_vertex()
    a = eng.run_sequential(small_power_law, spec, prog, seed=3, preprocess=True)
    b = eng.run_sequential(small_power_law, spec, prog, seed=3, preprocess=False)
    assert a.same_walks(b)


def test_deepwalk_length(small_power_law):
    ws = eng.run_sequential(small_power_law, QuerySpec.one_per_vertex(),
                            alg.deepwalk_program(80), seed=2)
    done = ws.status == eng.COMPLETE
    assert np.all(ws.lengths[done] == 80)
    assert np.all(small_power_law.degrees[ws.vertices[ws.offsets[:-1]][~done]] == 0) or \
        np.all(ws.lengths[~done] < 80)
    assert_adjacent(small_power_law, ws)


def test_ppr_mean_length():
    g = gr.power_law_graph(1000, 6, seed=9)
    src = int(np.argmax(g.degrees))
    ws = eng.run_sequential(g, QuerySpec.from_source(src, 1_000_000), alg.ppr_program(0.2),
                            seed=4)
    assert 4.9 <= ws.mean_steps <= 5.1
    one = eng.run_sequential(g, QuerySpec.from_source(src, 100), alg.ppr_program(1.0))
    assert np.all(one.lengths == 2)


@pytest.mark.parametrize("kind", list(SamplerKind))
def test_thread_count_invariance(small_power_law, kind):
    prog = alg.ppr_program(0.2, kind)
    spec = QuerySpec.one_per_vertex(3)
    a = eng.run_sequential(small_power_law, spec, prog, threads=1, seed=8)
    b = eng.run_sequential(small_power_law, spec, prog, threads=8, seed=8)
    assert a.same_walks(b)
    assert len(b.blocks) == 8


def test_dead_end_status():
    g = gr.from_edges([0, 1], [1, 2], 3)
    ws = eng.run_sequential(g, QuerySpec.one_per_vertex(), alg.deepwalk_program(10))
    assert ws.status.tolist() == [eng.DEAD_END] * 3
    assert ws.path(0).tolist() == [0, 1, 2]
    assert ws.path(2).tolist() == [2]


@pytest.mark.parametrize("kind", list(SamplerKind))
def test_step_surface_matches_kernel(small_power_law, kind):
    g = small_power_law
    if kind is SamplerKind.NAIVE:
        prog = alg.uniform_program(15)
    else:
        prog = alg.node2vec_program(alg.Node2VecParams(2, 0.5, 15), sampler=kind)
    ws = eng.run_sequential(g, QuerySpec.from_source(5, 30), prog, seed=12)
    for q in range(30):
        w = eng.walk(g, prog, 5, query_id=q, seed=12)
        assert w.path == ws.path(q).tolist()


def test_custom_program_with_payload():
    # Weight prefers edges to vertices not yet visited, tracked in the state row
    def weight(G, P, path, plen, state, v, e):
        return 0.1 if state[G[1][e]] > 0 else 1.0

    def update(G, P, path, plen, state, e, rng, q):
        state[G[1][e]] = 1.0
        return plen >= 6

    g = gr.uniform_random_graph(64, 4, seed=1)
    prog = WalkProgram(weight, update, "dynamic", "its", state_width=64, max_length=0)
    ws = eng.run_sequential(g, QuerySpec.one_per_vertex(), prog, seed=1)
    assert np.all(ws.lengths[ws.status == eng.COMPLETE] == 6)
    assert_adjacent(g, ws)


def test_negative_weight_is_contract_error(triangle):
    prog = WalkProgram(lambda G, P, path, plen, state, v, e: -1.0, alg.length_reached,
                       "dynamic", "its", iparams=[3])
    with pytest.raises(ProgramContractError):
        eng.run_sequential(triangle, QuerySpec.one_per_vertex(), prog)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 30), st.integers(1, 90), st.integers(0, 2**31),
       st.sampled_from(list(SamplerKind)))
def test_paths_follow_edges(n, m, seed, kind):
    rng = np.random.default_rng(seed)
    g = gr.from_edges(rng.integers(0, n, m), rng.integers(0, n, m), n,
                      weights=rng.uniform(0, 3, m))
    prog = alg.uniform_program(8, kind) if kind is SamplerKind.NAIVE else \
        alg.deepwalk_program(8, weighted=True, sampler=kind)
    ws = eng.run_sequential(g, QuerySpec.one_per_vertex(), prog, seed=seed)
    assert_adjacent(g, ws)
    assert np.all(ws.lengths >= 1) and np.all(ws.lengths <= 8)
    # zero-weight edges are never taken
    for q in range(len(ws)):
        p = ws.path(q)
        for u, v in zip(p[:-1], p[1:]):
            lo, hi = g.offsets[u], g.offsets[u + 1]
            assert np.any((g.neighbors[lo:hi] == v) & (g.weights[lo:hi] > 0))


@pytest.mark.parametrize("kind", list(SamplerKind))
def test_time_scales_linearly_in_steps(kind):
    g = gr.power_law_graph(20_000, 8, seed=5)
    g = g.with_weights(gr.synthetic_weights(g.edge_count, 5))

    def timed(length):
        prog = alg.uniform_program(length) if kind is SamplerKind.NAIVE else \
            alg.deepwalk_program(length, weighted=True, sampler=kind)
        # long enough runs that scheduler noise stays well under the margin
        spec = QuerySpec.one_per_vertex(3)
        eng.run_sequential(g, spec, prog)
        gc.collect()
        best = float("inf")
        for _ in range(5):
            ws = eng.run_sequential(g, spec, prog)
            best = min(best, ws.execute_seconds)
        return best

    assert timed(60) <= 2.5 * timed(30)


def test_user_function_without_source_file_compiles_uncached():
    ns = {}
    exec("def w(G, P, path, plen, state, v, e):\n    return 2.0\n", ns)
    fn = eng.weight_function(ns["w"])
    prog = WalkProgram(fn, alg.length_reached, WalkerType.UNBIASED, "naive", iparams=[4],
                       max_length=4)
    g = gr.power_law_graph(200, 4, seed=1)
    ws = eng.run_sequential(g, QuerySpec.one_per_vertex(), prog)
    assert ws.lengths.max() <= 4


def test_allocating_user_function_falls_back_to_refcounted_build():
    ns = {"np": np}
    exec(compile("def w2(G, P, path, plen, state, v, e):\n    return np.ones(2).sum()\n",
                 "<alloc>", "exec"), ns)
    prog = WalkProgram(ns["w2"], alg.length_reached, WalkerType.STATIC, "its", iparams=[5],
                       max_length=5)
    g = gr.power_law_graph(300, 4, seed=2)
    ws = eng.run_sequential(g, QuerySpec.one_per_vertex(), prog, preprocess=False)
    assert ws.total_steps > 0
