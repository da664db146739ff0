"""Step interleaving: Move executed stage by stage across a group of walkers.

Each sampler's Move is cut into stages holding at most one dependent memory
access. Loads are replaced by prefetches issued one stage ahead, and the
worker switches to the next walker after every stage so the prefetched line
arrives while other walkers compute.

Stage plans (``x``/``y`` are the drawn integer and real):

=====  ==============================================================
NAIVE  S0 pf d_v | S1 draw x, pf E_v[x] | S2 commit
ALIAS  S0 pf d_v | S1 draw x, y, pf (H[x], A[x]) | S2 select, pf E_v[i] | S3 commit
ITS    S0 pf d_v | S1 pf P'[d-1] | S2 draw x | cycle{probe: pf P'[mid]; compare} | pf E_v[i] | commit
REJ    S0 pf d_v | S1 pf p*_v | cycle{S2 draw x, y, pf C[x]; S3 accept?} | S4 pf E_v[x] | S5 commit
O_REJ  S0 pf d_v | cycle{S2 draw x, y, pf E_v[x]; S3 Weight(e) accept?} | S4 pf E_v[x] | S5 commit
=====  ==============================================================

Non-cycle stages run in lock-step over the task ring (all ``k`` slots finish
a stage before the next stage starts). Cycle stages go through a search ring
of ``k'`` slots in which each walker advances independently.

Every walker consumes its own random stream in exactly the order of the
sequential engine, so interleaved and sequential runs produce the same
walks bit for bit.
"""
import enum
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
from llvmlite import ir
from numba import njit, types
from numba.core.extending import intrinsic

from . import engine as eng
from . import sampler as smp
from .errors import ConfigurationError, NonterminatingSamplerError
from .sampler import SamplerKind

DEFAULT_K = 64
DEFAULT_K_PRIME = 32
K_GRID = tuple(1 << i for i in range(11))

_ITS = int(SamplerKind.ITS)
_ALIAS = int(SamplerKind.ALIAS)
_REJ = int(SamplerKind.REJ)


class PrefetchHint(enum.IntEnum):
    """Cache level targeted by prefetches; the value is LLVM's locality argument."""

    OFF = -1
    NON_TEMPORAL = 0
    L3 = 1
    L2 = 2
    L1_ALL_LEVELS = 3

    @classmethod
    def parse(cls, name):
        if isinstance(name, cls):
            return name
        key = str(name).strip().upper().replace("-", "_")
        aliases = {"L1": "L1_ALL_LEVELS", "T0": "L1_ALL_LEVELS", "T1": "L2", "T2": "L3",
                   "NTA": "NON_TEMPORAL", "NONE": "OFF"}
        return cls[aliases.get(key, key)]


def _prefetch_intrinsic(locality):
    @intrinsic
    def _pf(typingctx, arr, idx):
        if not isinstance(arr, types.Array) or not isinstance(idx, types.Integer):
            return None

        def codegen(context, builder, sig, args):
            ary = context.make_array(sig.args[0])(context, builder, args[0])
            ptr = builder.gep(ary.data, [args[1]])
            i8p = ir.IntType(8).as_pointer()
            i32 = ir.IntType(32)
            fnty = ir.FunctionType(ir.VoidType(), [i8p, i32, i32, i32])
            fn = builder.module.declare_intrinsic("llvm.prefetch", [i8p], fnty)
            builder.call(fn, [builder.bitcast(ptr, i8p), ir.Constant(i32, 0),
                              ir.Constant(i32, locality), ir.Constant(i32, 1)])
            return context.get_dummy_value()

        return types.void(arr, idx), codegen
    return _pf


_pf0 = _prefetch_intrinsic(0)
_pf1 = _prefetch_intrinsic(1)
_pf2 = _prefetch_intrinsic(2)
_pf3 = _prefetch_intrinsic(3)


@njit(inline="always")
def prefetch(arr, i, hint):
    """Read prefetch of flat element ``i`` of C-contiguous ``arr``; never changes values."""
    if hint == 3:
        _pf3(arr, i)
    elif hint == 2:
        _pf2(arr, i)
    elif hint == 1:
        _pf1(arr, i)
    elif hint == 0:
        _pf0(arr, i)


# ------------------------------------------------------------ stage machines
#
# Task ring (indexed by slot s): cur, tr_lo, tr_d, tr_base, tr_pidx, tr_x, tr_y.
# tr_x < 0 marks a walker that cannot move (dead end). mv[:mm] lists the
# slots taking part in this Move; rq[s] is the stream index of slot s.

@njit(cache=True)
def _s0_degree(G, TT, flow, mv, mm, cur, hint):
    offsets = G[0]
    total = TT[5]
    for i in range(mm):
        v = cur[mv[i]]
        prefetch(offsets, v, hint)
        if flow == eng.FLOW_TABLE:
            prefetch(total, v, hint)


@njit(cache=True)
def _s1_locate(G, TT, flow, mv, mm, cur, tr_lo, tr_d, tr_base, tr_pidx, tr_x, gbase):
    """Read the (prefetched) degree and resolve where this walker's tables live."""
    offsets = G[0]
    total = TT[5]
    for i in range(mm):
        s = mv[i]
        v = cur[s]
        lo = offsets[v]
        d = offsets[v + 1] - lo
        tr_lo[s] = lo
        tr_d[s] = d
        if flow == eng.FLOW_TABLE:
            tr_base[s] = lo
            tr_pidx[s] = v
        else:
            tr_base[s] = gbase[s]
            tr_pidx[s] = s
        tr_x[s] = 0
        if d == 0:
            tr_x[s] = -1
        elif (flow == eng.FLOW_TABLE or flow == eng.FLOW_GATHER) and total[tr_pidx[s]] <= 0.0:
            tr_x[s] = -1


@njit(cache=True)
def _move_naive(G, mv, mm, cur, rq, rng, tr_lo, tr_d, tr_x, hint):
    offsets = G[0]
    neighbors = G[1]
    for i in range(mm):
        prefetch(offsets, cur[mv[i]], hint)
    for i in range(mm):
        s = mv[i]
        v = cur[s]
        lo = offsets[v]
        d = offsets[v + 1] - lo
        tr_lo[s] = lo
        tr_d[s] = d
        if d == 0:
            tr_x[s] = -1
            continue
        x = smp.naive_pick(d, rng, rq[s])
        tr_x[s] = x
        prefetch(neighbors, lo + x, hint)


@njit(cache=True)
def _move_alias(G, TT, mv, mm, rq, rng, tr_lo, tr_base, tr_d, tr_x, tr_y, hint):
    prob = TT[1]
    alias = TT[2]
    neighbors = G[1]
    # S1: both draws, then fetch the slot
    for i in range(mm):
        s = mv[i]
        if tr_x[s] < 0:
            continue
        x = smp.uniform_int(rng, rq[s], tr_d[s])
        tr_y[s] = smp.uniform_real(rng, rq[s], 1.0)
        tr_x[s] = x
        prefetch(prob, tr_base[s] + x, hint)
        prefetch(alias, 2 * (tr_base[s] + x), hint)
    # S2: pick first/second, fetch the edge
    for i in range(mm):
        s = mv[i]
        if tr_x[s] < 0:
            continue
        j = smp.alias_select(prob, alias, tr_base[s], tr_x[s], tr_y[s])
        tr_x[s] = j
        prefetch(neighbors, tr_lo[s] + j, hint)


@njit(cache=True)
def _search_its(TT, mv, mm, rq, rng, tr_base, tr_d, tr_x, tr_y, kp, sr, hint):
    """Bisection over P' for every walker, asynchronously through the search ring.

    ``sr`` columns: task slot, stage (0 probe, 1 compare), lo, hi, mid.
    """
    cum = TT[0]
    for j in range(kp):
        sr[j, 0] = -1
    submitted = 0
    completed = 0
    index = 0
    busy = 0
    peak = 0
    # walkers that cannot move never enter the ring
    todo = 0
    for i in range(mm):
        if tr_x[mv[i]] >= 0:
            todo += 1
    while completed < todo:
        if sr[index, 0] < 0:
            while submitted < mm and tr_x[mv[submitted]] < 0:
                submitted += 1
            if submitted < mm:
                s = mv[submitted]
                submitted += 1
                sr[index, 0] = s
                sr[index, 1] = 0
                sr[index, 2] = 0
                sr[index, 3] = tr_d[s] - 1
                busy += 1
                if busy > peak:
                    peak = busy
        elif sr[index, 1] == 0:
            s = sr[index, 0]
            if sr[index, 2] < sr[index, 3]:
                mid = (sr[index, 2] + sr[index, 3]) >> 1
                sr[index, 4] = mid
                sr[index, 1] = 1
                prefetch(cum, tr_base[s] + mid, hint)
            else:
                tr_x[s] = sr[index, 2]
                sr[index, 0] = -1
                busy -= 1
                completed += 1
        else:
            s = sr[index, 0]
            mid = sr[index, 4]
            if tr_y[s] < cum[tr_base[s] + mid]:
                sr[index, 3] = mid
            else:
                sr[index, 2] = mid + 1
            sr[index, 1] = 0
        index += 1
        if index == kp:
            index = 0
    return peak


@njit(cache=True)
def _move_its(G, TT, mv, mm, rq, rng, tr_lo, tr_base, tr_d, tr_x, tr_y, kp, sr, hint):
    cum = TT[0]
    neighbors = G[1]
    for i in range(mm):
        s = mv[i]
        if tr_x[s] >= 0:
            prefetch(cum, tr_base[s] + tr_d[s] - 1, hint)
    for i in range(mm):
        s = mv[i]
        if tr_x[s] >= 0:
            tr_y[s] = smp.uniform_real(rng, rq[s], cum[tr_base[s] + tr_d[s] - 1])
    peak = _search_its(TT, mv, mm, rq, rng, tr_base, tr_d, tr_x, tr_y, kp, sr, hint)
    for i in range(mm):
        s = mv[i]
        if tr_x[s] >= 0:
            prefetch(neighbors, tr_lo[s] + tr_x[s], hint)
    return peak


@njit(cache=True)
def _search_rej(G, P, weight_fn, TT, oblivious, p_user, mv, mm, spath, slot_len, states, rq,
                rng, tr_lo, tr_base, tr_pidx, tr_d, tr_x, kp, sr, sry, cap, hint):
    """Dart throwing for every walker through the search ring.

    ``sr`` columns: task slot, stage (2 throw, 3 test), x, trials.
    With ``oblivious`` the envelope is ``p_user`` and the target height
    comes from Weight; otherwise from the gathered/preprocessed table.
    """
    w = TT[3]
    pstar = TT[4]
    neighbors = G[1]
    for j in range(kp):
        sr[j, 0] = -1
    submitted = 0
    completed = 0
    index = 0
    busy = 0
    peak = 0
    trials = 0
    todo = 0
    for i in range(mm):
        if tr_x[mv[i]] >= 0:
            todo += 1
    while completed < todo:
        if sr[index, 0] < 0:
            while submitted < mm and tr_x[mv[submitted]] < 0:
                submitted += 1
            if submitted < mm:
                s = mv[submitted]
                submitted += 1
                sr[index, 0] = s
                sr[index, 1] = 2
                sr[index, 3] = 0
                sry[index, 1] = p_user if oblivious else pstar[tr_pidx[s]]
                busy += 1
                if busy > peak:
                    peak = busy
        elif sr[index, 1] == 2:
            s = sr[index, 0]
            q = rq[s]
            x = smp.uniform_int(rng, q, tr_d[s])
            sry[index, 0] = smp.uniform_real(rng, q, sry[index, 1])
            sr[index, 2] = x
            sr[index, 3] += 1
            sr[index, 1] = 3
            if oblivious:
                prefetch(neighbors, tr_lo[s] + x, hint)
            else:
                prefetch(w, tr_base[s] + x, hint)
        else:
            s = sr[index, 0]
            x = sr[index, 2]
            if oblivious:
                plen = slot_len[s]
                hit = eng.orej_accept(G, P, weight_fn, spath[s, :plen], plen, states[rq[s]],
                                      spath[s, plen - 1], tr_lo[s] + x, sry[index, 0], p_user)
            else:
                hit = sry[index, 0] < w[tr_base[s] + x]
            done = False
            if hit:
                tr_x[s] = x
                done = True
            elif oblivious and sr[index, 3] == eng.soft_cap(tr_d[s]):
                plen = slot_len[s]
                if eng.all_zero(G, P, weight_fn, spath[s, :plen], plen, states[rq[s]],
                                spath[s, plen - 1], tr_lo[s], tr_d[s]):
                    tr_x[s] = -1
                    done = True
            if done:
                trials += sr[index, 3]
                sr[index, 0] = -1
                busy -= 1
                completed += 1
            elif sr[index, 3] >= cap:
                raise NonterminatingSamplerError("rejection sampling exceeded its trial cap")
            else:
                sr[index, 1] = 2
        index += 1
        if index == kp:
            index = 0
    return peak, trials


@njit(cache=True)
def _move_rej(G, P, weight_fn, TT, oblivious, p_user, mv, mm, spath, slot_len, states, rq, rng,
              tr_lo, tr_base, tr_pidx, tr_d, tr_x, kp, sr, sry, cap, hint):
    neighbors = G[1]
    pstar = TT[4]
    if not oblivious:
        for i in range(mm):
            s = mv[i]
            if tr_x[s] >= 0:
                prefetch(pstar, tr_pidx[s], hint)
    peak, trials = _search_rej(G, P, weight_fn, TT, oblivious, p_user, mv, mm, spath, slot_len,
                               states, rq, rng, tr_lo, tr_base, tr_pidx, tr_d, tr_x, kp, sr,
                               sry, cap, hint)
    for i in range(mm):
        s = mv[i]
        if tr_x[s] >= 0:
            prefetch(neighbors, tr_lo[s] + tr_x[s], hint)
    return peak, trials


@njit(cache=True)
def move_group(G, P, weight_fn, flow, sampler, TT, gbase, p_star, mv, mm, spath, slot_len,
               states, rq, rng, tr, trf, kp, sr, sry, cap, hint):
    """Interleaved Move for the walkers in ``mv[:mm]``.

    Leaves the selected local edge index (or -1) in ``tr[s, 4]``; returns
    (search-ring peak occupancy, rejection trials).
    """
    cur = tr[:, 0]
    tr_lo = tr[:, 1]
    tr_d = tr[:, 2]
    tr_base = tr[:, 3]
    tr_x = tr[:, 4]
    tr_pidx = tr[:, 5]
    tr_y = trf
    for i in range(mm):
        s = mv[i]
        cur[s] = spath[s, slot_len[s] - 1]
    if flow == eng.FLOW_NAIVE:
        _move_naive(G, mv, mm, cur, rq, rng, tr_lo, tr_d, tr_x, hint)
        return 0, 0
    _s0_degree(G, TT, flow, mv, mm, cur, hint)
    _s1_locate(G, TT, flow, mv, mm, cur, tr_lo, tr_d, tr_base, tr_pidx, tr_x, gbase)
    if flow == eng.FLOW_OREJ:
        return _move_rej(G, P, weight_fn, TT, True, p_star, mv, mm, spath, slot_len, states, rq,
                         rng, tr_lo, tr_base, tr_pidx, tr_d, tr_x, kp, sr, sry, cap, hint)
    if sampler == _ALIAS:
        _move_alias(G, TT, mv, mm, rq, rng, tr_lo, tr_base, tr_d, tr_x, tr_y, hint)
        return 0, 0
    if sampler == _ITS:
        return _move_its(G, TT, mv, mm, rq, rng, tr_lo, tr_base, tr_d, tr_x, tr_y, kp, sr,
                         hint), 0
    return _move_rej(G, P, weight_fn, TT, False, 0.0, mv, mm, spath, slot_len, states, rq, rng,
                     tr_lo, tr_base, tr_pidx, tr_d, tr_x, kp, sr, sry, cap, hint)


# -------------------------------------------------------------- run kernel

@njit(cache=True)
def _emit(out, pos, spath, s, plen):
    if pos + plen > out.size:
        out = eng.grow(out, pos + plen)
    for j in range(plen):
        out[pos + j] = spath[s, j]
    return out


@njit(cache=True)
def _grow_paths(spath, need):
    cap = spath.shape[1] * 2
    while cap < need:
        cap *= 2
    bigger = np.empty((spath.shape[0], cap), dtype=np.int64)
    bigger[:, :spath.shape[1]] = spath
    return bigger


@njit(nogil=True, cache=True)
def run_block_interleaved(G, P, weight_fn, update_fn, flow, sampler, T, p_star, sources, qlo,
                          qhi, rng, states, max_len, cap, k, kp, hint):
    """Execute queries ``qlo..qhi-1`` with at most ``k`` walkers in flight."""
    offsets = G[0]
    neighbors = G[1]
    nq = qhi - qlo
    k = max(1, min(k, nq))
    kp = max(1, min(kp, k))
    lengths = np.zeros(nq, dtype=np.int64)
    status = np.zeros(nq, dtype=np.uint8)
    starts = np.zeros(nq, dtype=np.int64)
    out = np.empty(max(64, 8 * nq), dtype=np.int64)
    pos = 0

    slot_q = np.full(k, -1, dtype=np.int64)
    slot_len = np.zeros(k, dtype=np.int64)
    spath = np.empty((k, 16), dtype=np.int64)
    tr = np.zeros((k, 6), dtype=np.int64)
    trf = np.zeros(k)
    mv = np.empty(k, dtype=np.int64)
    act = np.empty(k, dtype=np.int64)
    gbase = np.zeros(k, dtype=np.int64)
    sr = np.empty((kp, 5), dtype=np.int64)
    sry = np.empty((kp, 2))
    pool = 64
    D = eng.new_tables(sampler, pool, k)
    scratch = 64
    small = np.empty(scratch, dtype=np.int64)
    large = np.empty(scratch, dtype=np.int64)

    submitted = 0
    completed = 0
    peak_tr = 0
    peak_sr = 0
    trials = 0
    for s in range(k):
        q = qlo + submitted
        submitted += 1
        slot_q[s] = q
        spath[s, 0] = sources[q]
        slot_len[s] = 1

    while completed < nq:
        # retire walkers already at their length bound, admitting replacements
        m = 0
        for s in range(k):
            while slot_q[s] >= 0 and max_len > 0 and slot_len[s] >= max_len:
                q = slot_q[s]
                out = _emit(out, pos, spath, s, slot_len[s])
                starts[q - qlo] = pos
                lengths[q - qlo] = slot_len[s]
                pos += slot_len[s]
                completed += 1
                slot_q[s] = -1
                if submitted < nq:
                    q = qlo + submitted
                    submitted += 1
                    slot_q[s] = q
                    spath[s, 0] = sources[q]
                    slot_len[s] = 1
            if slot_q[s] >= 0:
                act[m] = s
                m += 1
        if m == 0:
            continue
        if m > peak_tr:
            peak_tr = m

        # Gather (not interleaved)
        mm = 0
        if flow == eng.FLOW_GATHER:
            need = 0
            dmax = 0
            for i in range(m):
                s = act[i]
                v = spath[s, slot_len[s] - 1]
                d = offsets[v + 1] - offsets[v]
                gbase[s] = need
                need += d
                dmax = max(dmax, d)
            if need > pool:
                while pool < need:
                    pool *= 2
                D = eng.new_tables(sampler, pool, k)
            if dmax > scratch:
                while scratch < dmax:
                    scratch *= 2
                small = np.empty(scratch, dtype=np.int64)
                large = np.empty(scratch, dtype=np.int64)
            for i in range(m):
                s = act[i]
                plen = slot_len[s]
                v = spath[s, plen - 1]
                lo = offsets[v]
                d = offsets[v + 1] - lo
                D[5][s] = 0.0
                if d > 0:
                    eng.gather_into(G, P, weight_fn, sampler, D, gbase[s], s, spath[s, :plen],
                                    plen, states[slot_q[s]], v, lo, d, small, large)
        for i in range(m):
            mv[mm] = act[i]
            mm += 1

        TT = T if flow != eng.FLOW_GATHER else D
        pk, t = move_group(G, P, weight_fn, flow, sampler, TT, gbase, p_star, mv, mm, spath,
                           slot_len, states, slot_q, rng, tr, trf, kp, sr, sry, cap, hint)
        if pk > peak_sr:
            peak_sr = pk
        trials += t

        # commit + Update; finished walkers make room for the next queries
        for i in range(m):
            s = act[i]
            q = slot_q[s]
            x = tr[s, 4]
            finished = False
            st = eng.COMPLETE
            if x < 0:
                finished = True
                st = eng.DEAD_END
            else:
                e = tr[s, 1] + x
                plen = slot_len[s]
                if plen + 1 > spath.shape[1]:
                    spath = _grow_paths(spath, plen + 1)
                spath[s, plen] = neighbors[e]
                plen += 1
                slot_len[s] = plen
                finished = update_fn(G, P, spath[s, :plen], plen, states[q], e, rng, q)
            if finished:
                out = _emit(out, pos, spath, s, slot_len[s])
                starts[q - qlo] = pos
                lengths[q - qlo] = slot_len[s]
                status[q - qlo] = st
                pos += slot_len[s]
                completed += 1
                slot_q[s] = -1
                if submitted < nq:
                    q = qlo + submitted
                    submitted += 1
                    slot_q[s] = q
                    spath[s, 0] = sources[q]
                    slot_len[s] = 1

    ordered = np.empty(pos, dtype=np.int64)
    at = 0
    for i in range(nq):
        ordered[at:at + lengths[i]] = out[starts[i]:starts[i] + lengths[i]]
        at += lengths[i]
    return ordered, lengths, status, trials, peak_tr, peak_sr


# ------------------------------------------------------------- Python API

def _check_rings(k, k_prime):
    if k < 1:
        raise ConfigurationError(f"task ring size k must be >= 1, got {k}")
    if not 1 <= k_prime <= k:
        raise ConfigurationError(f"search ring size k' must be in [1, k], got {k_prime}")


def run_interleaved(g, spec, prog, threads=1, seed=0, k=DEFAULT_K, k_prime=DEFAULT_K_PRIME,
                    hint=PrefetchHint.L1_ALL_LEVELS, preprocess=True,
                    trial_cap=smp.DEFAULT_TRIAL_CAP):
    """Run every query with step interleaving; output equals ``run_sequential``."""
    _check_rings(k, k_prime)
    hint = int(PrefetchHint.parse(hint))
    plan = eng.plan_run(g, spec, prog, seed, preprocess, trial_cap)

    def block(plan, lo, hi):
        return run_block_interleaved(plan.G, plan.prog.params, plan.prog.weight,
                                     plan.prog.update, plan.flow, plan.sampler, plan.tables,
                                     plan.p_star, plan.sources, lo, hi, plan.rng, plan.states,
                                     plan.max_len, plan.cap, int(k), int(k_prime), hint)

    ws, parts = eng.execute(plan, threads, block)
    ws.stats = {"k": k, "k_prime": k_prime,
                "peak_task_ring": max((int(p[4]) for p in parts), default=0),
                "peak_search_ring": max((int(p[5]) for p in parts), default=0)}
    return ws


def run(g, spec, prog, threads=1, seed=0, interleave=True, k=DEFAULT_K,
        k_prime=DEFAULT_K_PRIME, hint=PrefetchHint.L1_ALL_LEVELS, preprocess=True,
        trial_cap=smp.DEFAULT_TRIAL_CAP):
    if interleave:
        return run_interleaved(g, spec, prog, threads, seed, k, k_prime, hint, preprocess,
                               trial_cap)
    return eng.run_sequential(g, spec, prog, threads, seed, preprocess, trial_cap)


def interleaved_move(g, group, ctxs, prog, k_prime=DEFAULT_K_PRIME,
                     hint=PrefetchHint.L1_ALL_LEVELS, trial_cap=smp.DEFAULT_TRIAL_CAP):
    """Move every walker of ``group`` once, interleaving their stages.

    ``ctxs[i]`` is the TransitionContext of ``group[i]`` (ignored for NAIVE
    and O_REJ). Returns the traversed edge index per walker, or None for a
    walker that hit a dead end (its status is set accordingly). Each
    walker's stream advances exactly as under ``engine.move``.
    """
    kind = prog.sampling_method
    eng.validate(g, prog)
    m = len(group)
    if m == 0:
        return []
    flow = eng.flow_for(prog, preprocess=False)
    G = g.kernel_view()
    plen = np.array([len(w.path) for w in group], dtype=np.int64)
    spath = np.zeros((m, max(int(plen.max()), 1)), dtype=np.int64)
    for i, w in enumerate(group):
        spath[i, :plen[i]] = w.path
    width = max((w.payload.size for w in group), default=0)
    states = np.zeros((m, width))
    for i, w in enumerate(group):
        states[i, :w.payload.size] = w.payload
    rng = np.array([w.rng.state[0] for w in group], dtype=np.uint64)
    gbase = np.zeros(m, dtype=np.int64)
    if flow == eng.FLOW_GATHER:
        D, gbase = _pack_contexts(g, kind, group, ctxs)
    else:
        D = eng.new_tables(-1, 0, 0)
    kp = max(1, min(int(k_prime), m))
    tr = np.zeros((m, 6), dtype=np.int64)
    p_star = float(prog.max_weight(g)) if kind is SamplerKind.O_REJ else 0.0
    move_group(G, prog.params, prog.weight, flow, int(kind), D, gbase, p_star,
               np.arange(m, dtype=np.int64), m, spath, plen, states, np.arange(m), rng, tr,
               np.zeros(m), kp, np.empty((kp, 5), dtype=np.int64), np.empty((kp, 2)),
               int(trial_cap), int(PrefetchHint.parse(hint)))
    edges = []
    for i, w in enumerate(group):
        w.rng.state[0] = rng[i]
        x = int(tr[i, 4])
        if x < 0:
            w.status = "dead_end"
            edges.append(None)
            continue
        e = int(tr[i, 1]) + x
        w.path.append(int(g.neighbors[e]))
        edges.append(e)
    return edges


def _pack_contexts(g, kind, group, ctxs):
    """Lay the walkers' sampler states out back to back, as the gather pool does."""
    m = len(group)
    sizes = np.array([g.degree(w.cur) for w in group], dtype=np.int64)
    base = np.zeros(m, dtype=np.int64)
    base[1:] = np.cumsum(sizes)[:-1]
    D = eng.new_tables(int(kind), max(int(sizes.sum()), 1), m)
    cum, prob, alias, w, pstar, total = D
    for i, c in enumerate(ctxs):
        if c is None or c.state is None or sizes[i] == 0:
            continue
        lo, hi = base[i], base[i] + sizes[i]
        total[i] = 1.0
        if kind is SamplerKind.ITS:
            cum[lo:hi] = c.state.cumulative
        elif kind is SamplerKind.ALIAS:
            prob[lo:hi] = c.state.prob
            alias[lo:hi] = c.state.alias
        else:
            w[lo:hi] = c.weights
            pstar[i] = c.state.p_star
    return D, base


# ------------------------------------------------------------------ tuner

@dataclass
class TuningReport:
    k_star: int
    k_prime_star: int
    task_rows: list = field(default_factory=list)
    search_rows: list = field(default_factory=list)
    exhausted: bool = False
    seconds: float = 0.0

    def to_text(self):
        lines = ["# phase 1: task ring size k (NAIVE + ALIAS)",
                 "k\tthroughput_steps_per_sec"]
        lines += [f"{k}\t{tput:.1f}" for k, tput in self.task_rows]
        lines += [f"# phase 2: search ring size k' at k={self.k_star} (ITS + REJ + O_REJ)",
                  "k\tthroughput_steps_per_sec"]
        lines += [f"{kp}\t{tput:.1f}" for kp, tput in self.search_rows]
        lines.append(f"# recommended k={self.k_star} k'={self.k_prime_star}"
                     + (" (budget exhausted)" if self.exhausted else ""))
        return "\n".join(lines) + "\n"


def tune_ring_sizes(g, threads=1, budget=240.0, k_grid=K_GRID, probe_length=10, seed=0,
                    hint=PrefetchHint.L1_ALL_LEVELS, max_queries=None):
    """Empirically choose ring sizes (k*, k'*) on graph ``g``.

    Phase 1 sweeps ``k`` under NAIVE and ALIAS on a static probe workload (one
    walk of ``probe_length`` vertices per vertex) and keeps the ``k`` with
    the shortest combined time. Phase 2 fixes ``k*`` and sweeps ``k'`` over
    powers of two up to ``k*`` under ITS, REJ and O_REJ. When ``budget``
    seconds run out the best pair found so far is returned with
    ``exhausted`` set.
    """
    from .algorithms import deepwalk_program, uniform_program

    t_start = time.perf_counter()
    n = g.vertex_count if max_queries is None else min(g.vertex_count, max_queries)
    spec = np.arange(n, dtype=np.int64)
    weighted = g.weights is not None
    progs = {SamplerKind.NAIVE: uniform_program(probe_length)}
    for kind in (SamplerKind.ALIAS, SamplerKind.ITS, SamplerKind.REJ, SamplerKind.O_REJ):
        progs[kind] = deepwalk_program(probe_length, weighted=weighted, sampler=kind)
    plans = {kind: eng.plan_run(g, spec, p, seed) for kind, p in progs.items()}
    hint = int(PrefetchHint.parse(hint))

    def measure(kind, k, kp):
        plan = plans[kind]

        def block(plan, lo, hi):
            return run_block_interleaved(plan.G, plan.prog.params, plan.prog.weight,
                                         plan.prog.update, plan.flow, plan.sampler,
                                         plan.tables, plan.p_star, plan.sources, lo, hi,
                                         plan.rng.copy(), plan.states, plan.max_len, plan.cap,
                                         k, kp, hint)
        ws, _ = eng.execute(plan, threads, block)
        return ws.total_steps, ws.execute_seconds

    # compile and warm caches outside the timed sweep
    for kind in plans:
        measure(kind, 2, 1)

    def over_budget():
        return time.perf_counter() - t_start > budget

    exhausted = False
    task_rows = []
    best_k, best_t = 1, float("inf")
    for k in k_grid:
        if over_budget():
            exhausted = True
            break
        steps = 0
        secs = 0.0
        for kind in (SamplerKind.NAIVE, SamplerKind.ALIAS):
            s, t = measure(kind, k, min(k, DEFAULT_K_PRIME))
            steps += s
            secs += t
        task_rows.append((k, steps / secs if secs > 0 else float("inf")))
        if secs < best_t:
            best_k, best_t = k, secs

    search_rows = []
    best_kp, best_t = 1, float("inf")
    kp = 1
    while kp <= best_k and not exhausted:
        if over_budget():
            exhausted = True
            break
        steps = 0
        secs = 0.0
        for kind in (SamplerKind.ITS, SamplerKind.REJ, SamplerKind.O_REJ):
            s, t = measure(kind, best_k, kp)
            steps += s
            secs += t
        search_rows.append((kp, steps / secs if secs > 0 else float("inf")))
        if secs < best_t:
            best_kp, best_t = kp, secs
        kp *= 2
    if exhausted:
        warnings.warn("ring-size tuning ran out of budget; returning best pair so far")
    return TuningReport(best_k, min(best_kp, best_k), task_rows, search_rows, exhausted,
                        time.perf_counter() - t_start)
