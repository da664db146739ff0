"""Command-line front end: ``walkforge convert|run|tune``."""
import argparse
import logging
import os
import queue
import struct
import sys
import threading
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import algorithms as alg
from . import graph as gr
from .engine import STATUS_NAMES, QuerySpec
from .errors import ConfigurationError, WalkforgeError
from .interleave import (DEFAULT_K, DEFAULT_K_PRIME, PrefetchHint, run,
                         tune_ring_sizes)
from .sampler import SamplerKind

log = logging.getLogger("walkforge")

MIN_BUFFER = 1 << 20
ALGORITHMS = ("ppr", "deepwalk", "node2vec", "metapath", "custom-uniform")
_BIN_RECORD = struct.Struct("<IBI")


def available_cores():
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1


# ------------------------------------------------------------------ writer

class WalkWriter:
    """Double-buffered record writer.

    Two buffers of ``buffer_bytes`` alternate: one is filled by the caller
    while a background thread flushes the other. When both are busy the
    caller blocks until the flusher hands one back. A record larger than a
    buffer is still written whole; the buffer grows and a warning is logged.

    Text records are ``query_id<TAB>status<TAB>v0 v1 ...`` with LF endings.
    Binary records are ``<u4 query_id, u1 status, u4 length>`` followed by
    ``length`` little-endian u4 vertex ids.
    """

    def __init__(self, path, buffer_bytes=MIN_BUFFER, binary=False):
        if buffer_bytes < MIN_BUFFER:
            raise ConfigurationError(f"output buffers must be at least {MIN_BUFFER} bytes")
        self.capacity = int(buffer_bytes)
        self.binary = binary
        self._fh = open(path, "wb")
        self._free = queue.Queue()
        self._full = queue.Queue(maxsize=1)
        for _ in range(2):
            self._free.put(bytearray())
        self._buf = self._free.get()
        self._error = None
        self._flusher = threading.Thread(target=self._flush_loop, daemon=True)
        self._flusher.start()

    def _flush_loop(self):
        while True:
            buf = self._full.get()
            if buf is None:
                return
            if self._error is None:
                try:
                    self._fh.write(buf)
                except OSError as exc:
                    self._error = exc
            buf.clear()
            self._free.put(buf)

    def _swap(self):
        self._full.put(self._buf)
        self._buf = self._free.get()
        if self._error is not None:
            raise self._error

    def encode(self, qid, status, path):
        if self.binary:
            return (_BIN_RECORD.pack(qid, status, len(path))
                    + np.asarray(path, dtype="<u4").tobytes())
        return b"%d\t%s\t%s\n" % (qid, STATUS_NAMES[status].encode(),
                                  " ".join(map(str, path.tolist())).encode())

    def write(self, qid, status, path):
        rec = self.encode(qid, status, path)
        if len(rec) > self.capacity:
            log.warning("record of query %d (%d bytes) exceeds the %d-byte buffer; growing it",
                        qid, len(rec), self.capacity)
        if self._buf and len(self._buf) + len(rec) > self.capacity:
            self._swap()
        self._buf += rec
        if len(self._buf) >= self.capacity:
            self._swap()

    def close(self):
        try:
            if self._buf:
                self._full.put(self._buf)
            self._full.put(None)
            self._flusher.join()
            if self._error is not None:
                raise self._error
        finally:
            self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def walk_writer(records, out_path, buffer_bytes=MIN_BUFFER, binary=False):
    """Write ``(query_id, status, path)`` records in the given order."""
    with WalkWriter(out_path, buffer_bytes, binary) as w:
        for qid, status, path in records:
            w.write(qid, status, path)


def write_walkset(ws, out_path, buffer_bytes=MIN_BUFFER, binary=False):
    """Dump a WalkSet block by block (query-id order within each worker block)."""
    with WalkWriter(out_path, buffer_bytes, binary) as w:
        for lo, hi in ws.blocks or [(0, len(ws))]:
            for q in range(lo, hi):
                w.write(q, int(ws.status[q]), ws.path(q))


# ------------------------------------------------------------------ config

@dataclass
class RunConfig:
    graph: str
    algorithm: str = "deepwalk"
    sampler: Optional[SamplerKind] = None
    interleave: bool = True
    k: int = DEFAULT_K
    k_prime: int = DEFAULT_K_PRIME
    threads: int = field(default_factory=available_cores)
    seed: int = 0
    termination_prob: float = 0.2
    length: int = 80
    a: float = 2.0
    b: float = 0.5
    schema: Optional[tuple] = None
    weighted: str = "auto"
    queries: QuerySpec = field(default_factory=QuerySpec.one_per_vertex)
    output: Optional[str] = None
    binary: bool = False
    buffer_bytes: int = MIN_BUFFER
    prefetch: PrefetchHint = PrefetchHint.L1_ALL_LEVELS

    def program(self, g):
        weighted = {"auto": g.weights is not None, "yes": True, "no": False}[self.weighted]
        if self.algorithm == "ppr":
            return alg.ppr_program(self.termination_prob, self.sampler)
        if self.algorithm == "deepwalk":
            return alg.deepwalk_program(self.length, weighted, self.sampler)
        if self.algorithm == "node2vec":
            return alg.node2vec_program(alg.Node2VecParams(self.a, self.b, self.length),
                                        weighted, self.sampler)
        if self.algorithm == "metapath":
            if g.labels is None:
                raise ConfigurationError("metapath needs an edge-labeled graph")
            schema = (alg.MetaPathSchema(self.schema) if self.schema
                      else alg.MetaPathSchema.random(g.label_set, 5, self.seed))
            return alg.metapath_program(schema, self.sampler)
        if self.algorithm == "custom-uniform":
            return alg.uniform_program(self.length, self.sampler)
        raise ConfigurationError(f"unknown algorithm {self.algorithm!r}")


def parse_queries(tokens):
    """``one-per-vertex [n]`` | ``from-source V x N`` | ``from-source V N`` | ``file PATH``."""
    if not tokens:
        return QuerySpec.one_per_vertex()
    kind, rest = tokens[0], [t for t in tokens[1:] if t.lower() != "x"]
    try:
        if kind == "one-per-vertex":
            return QuerySpec.one_per_vertex(int(rest[0]) if rest else 1)
        if kind == "from-source":
            return QuerySpec.from_source(int(rest[0]), int(rest[1]) if len(rest) > 1 else 1)
        if kind == "file":
            return QuerySpec.from_file(rest[0])
    except (IndexError, ValueError):
        pass
    raise ConfigurationError(f"bad query spec {' '.join(tokens)!r}")


def load_graph(path, undirected=False, weights="none", labels="none", num_labels=5, seed=0):
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == gr.MAGIC:
        return gr.read_binary(path)
    return gr.load_edge_list(path, directed=not undirected, weight_mode=weights,
                             label_mode=labels, num_labels=num_labels, seed=seed)


# ---------------------------------------------------------------- commands

def cmd_convert(args, out=None):
    out = out or sys.stdout
    g = gr.load_edge_list(args.input, directed=not args.undirected, weight_mode=args.weights,
                          label_mode=args.labels, num_labels=args.num_labels, seed=args.seed)
    gr.write_binary(g, args.output)
    st = g.stats
    print(f"V={g.vertex_count} E={g.edge_count} d_avg={st.d_avg:.2f} d_max={st.d_max}", file=out)
    return 0


def config_from_args(args):
    return RunConfig(
        graph=args.graph, algorithm=args.algorithm,
        sampler=None if args.sampler is None else SamplerKind.parse(args.sampler),
        interleave=args.interleave == "on", k=args.k, k_prime=args.k_prime,
        threads=args.threads or available_cores(), seed=args.seed,
        termination_prob=args.termination_prob, length=args.length, a=args.a, b=args.b,
        schema=tuple(int(x) for x in args.schema.split(",")) if args.schema else None,
        weighted=args.weighted, queries=parse_queries(args.queries), output=args.output,
        binary=args.binary, buffer_bytes=args.buffer_bytes,
        prefetch=PrefetchHint.parse(args.prefetch))


def cmd_run(cfg, out=None, graph_args=None):
    out = out or sys.stdout
    g = load_graph(cfg.graph, **(graph_args or {}))
    prog = cfg.program(g)
    ws = run(g, cfg.queries, prog, threads=cfg.threads, seed=cfg.seed,
             interleave=cfg.interleave, k=cfg.k, k_prime=cfg.k_prime, hint=cfg.prefetch)
    if cfg.output:
        write_walkset(ws, cfg.output, cfg.buffer_bytes, cfg.binary)
    dead = int(np.count_nonzero(ws.status))
    print(f"algorithm={prog.name} sampler={prog.sampling_method.name} "
          f"interleave={'on' if cfg.interleave else 'off'} threads={cfg.threads}", file=out)
    print(f"queries={len(ws)} dead_end={dead}", file=out)
    print(f"preprocessing_time_s={ws.preprocess_seconds:.6f}", file=out)
    print(f"execution_time_s={ws.execute_seconds:.6f}", file=out)
    print(f"total_steps={ws.total_steps}", file=out)
    print(f"throughput_steps_per_s={ws.throughput:.1f}", file=out)
    print(f"mean_length_steps={ws.mean_steps:.4f}", file=out)
    return 0


def cmd_tune(args, out=None):
    out = out or sys.stdout
    if not args.budget > 0:
        raise ConfigurationError(f"tuning budget must be positive, got {args.budget}")
    g = load_graph(args.graph, args.undirected, args.weights, args.labels, seed=args.seed)
    report = tune_ring_sizes(g, threads=args.threads or available_cores(), budget=args.budget,
                             seed=args.seed)
    out.write(report.to_text())
    print(f"k*={report.k_star} k'*={report.k_prime_star} seconds={report.seconds:.1f}", file=out)
    return 0


# ------------------------------------------------------------------ parser

def _graph_flags(p):
    p.add_argument("--undirected", action="store_true",
                   help="emit both directions of every edge-list line")
    p.add_argument("--weights", default="none", choices=("none", "file", "from_file", "random"),
                   help="edge weights for edge-list input; random draws from [1, 5)")
    p.add_argument("--labels", default="none", choices=("none", "file", "from_file", "random"),
                   help="edge labels for edge-list input")
    p.add_argument("--num-labels", type=int, default=5)


def _int64(text):
    v = int(text, 0)
    if not -(1 << 63) <= v < (1 << 64):
        raise argparse.ArgumentTypeError("seed must fit in 64 bits")
    return v


def build_parser():
    parser = argparse.ArgumentParser(prog="walkforge", description="In-memory random walks.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="edge list to binary WFG1")
    p.add_argument("input")
    p.add_argument("output")
    _graph_flags(p)
    p.add_argument("--seed", type=_int64, default=0)

    p = sub.add_parser("run", help="run walk queries")
    p.add_argument("graph", help="WFG1 file or edge list")
    _graph_flags(p)
    p.add_argument("--algorithm", default="deepwalk", choices=ALGORITHMS)
    p.add_argument("--sampler", default=None,
                   choices=("naive", "its", "alias", "rej", "o_rej", "o-rej"))
    p.add_argument("--interleave", default="on", choices=("on", "off"))
    p.add_argument("--k", type=int, default=DEFAULT_K, help="task ring size")
    p.add_argument("--k-prime", type=int, default=DEFAULT_K_PRIME, help="search ring size")
    p.add_argument("--threads", type=int, default=0, help="0 means all available cores")
    p.add_argument("--seed", type=_int64, default=0)
    p.add_argument("--termination-prob", "--termination", type=float, default=0.2)
    p.add_argument("--length", type=int, default=80, help="target walk length in vertices")
    p.add_argument("--a", type=float, default=2.0)
    p.add_argument("--b", type=float, default=0.5)
    p.add_argument("--schema", default=None, help="comma-separated edge labels")
    p.add_argument("--weighted", default="auto", choices=("auto", "yes", "no"))
    p.add_argument("--queries", nargs="+", default=None,
                   help="one-per-vertex [n] | from-source V x N | file PATH")
    p.add_argument("--output", default=None)
    p.add_argument("--binary", action="store_true", help="binary walk records")
    p.add_argument("--buffer-bytes", type=int, default=MIN_BUFFER)
    p.add_argument("--prefetch", default="l1",
                   choices=("l1", "l2", "l3", "nta", "off", "l1_all_levels", "non_temporal"))

    p = sub.add_parser("tune", help="choose ring sizes k and k'")
    p.add_argument("graph")
    _graph_flags(p)
    p.add_argument("--budget", type=float, default=240.0, help="seconds")
    p.add_argument("--threads", type=int, default=0)
    p.add_argument("--seed", type=_int64, default=0)
    return parser


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="walkforge: %(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.command == "convert":
            return cmd_convert(args)
        if args.command == "run":
            graph_args = dict(undirected=args.undirected, weights=args.weights,
                              labels=args.labels, num_labels=args.num_labels, seed=args.seed)
            return cmd_run(config_from_args(args), graph_args=graph_args)
        return cmd_tune(args)
    except (WalkforgeError, OSError, ValueError) as exc:
        print(f"walkforge: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
