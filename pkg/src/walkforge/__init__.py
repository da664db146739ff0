"""In-memory graph random walks with step interleaving.

Walk programs are written against a step-centric model (Gather, Move,
Update) and run on a CSR graph with one of five samplers. Runs can
interleave the stages of many walkers per thread to overlap memory
accesses; output is identical either way.
"""
from .algorithms import (MetaPathSchema, Node2VecParams, deepwalk_program,
                         metapath_program, node2vec_program, ppr_program,
                         uniform_program)
from .engine import (QuerySpec, TransitionContext, Walker, WalkerType,
                     WalkProgram, WalkSet, default_sampler, gather, move,
                     preprocess_static, run_sequential, step, update,
                     update_function, walk, weight_function)
from .errors import (ConfigurationError, EmptyDomainError, GraphBoundsError,
                     GraphFormatError, InvalidDistributionError,
                     NonterminatingSamplerError, ProgramContractError,
                     WalkforgeError)
from .graph import (Graph, GraphStats, from_edges, load_edge_list,
                    power_law_graph, read_binary, synthetic_labels,
                    synthetic_weights, uniform_random_graph, write_binary)
from .interleave import (PrefetchHint, TuningReport, interleaved_move, run,
                         run_interleaved, tune_ring_sizes)
from .rng import RngStream
from .sampler import SamplerKind

__version__ = "0.1.0"
