"""Command-line entry point. Every subcommand prints one JSON object."""

from __future__ import annotations

import argparse
import json
import math
import sys
import time

from . import exact, tree
from .errors import SpinlabError, InvalidInput
from .graphs import (configuration_model, double_cover, expansion_check, make_gadget,
                     read_graph, write_gadget, write_graph)
from .twospin import TwoSpinSpec, canonicalize, parse_model


def _num(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return x


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item") and not isinstance(obj, (list, dict)):
        try:
            obj = obj.item()
        except (AttributeError, ValueError):
            pass
    return _num(obj)


def _model(args, d):
    if getattr(args, "spec", None):
        return canonicalize(TwoSpinSpec.from_json(args.spec), d)
    if not getattr(args, "model", None):
        raise InvalidInput("--model (or --spec) is required")
    return parse_model(args.model, d)


def _graph_degree(G):
    degs = G.degrees()
    return int(degs.max()) if G.n else 1


def _fp_json(fp):
    rm = tree.root_marginals(fp)
    return {"star": {"p_plus": fp.star.p_plus, "t": fp.star.t},
            "plus": {"p_plus": fp.plus.p_plus, "t": fp.plus.t},
            "minus": {"p_plus": fp.minus.p_plus, "t": fp.minus.t},
            "unique": fp.unique, "gprime_at_star": fp.gprime_at_star,
            "near_critical": fp.near_critical,
            "mu_plus_occ": rm.mu_plus_occ, "mu_minus_occ": rm.mu_minus_occ}


# subcommands -----------------------------------------------------------------

def cmd_threshold(args):
    if args.family == "hardcore":
        return {"lambda_c": tree.lambda_c(args.d)}
    out = {"beta_c_af": tree.beta_c_af(args.B, args.d)}
    if args.beta is not None:
        out["B_c_ferro"] = tree.B_c_ferro(args.beta, args.d)
    return out


def cmd_fixpoints(args):
    model = _model(args, args.d)
    return {"model": model.describe(), **_fp_json(tree.find_fixed_points(model))}


def cmd_bethe(args):
    from .bethe import bethe_free_energy, local_expectation_pair, pair_constants
    model = _model(args, args.d)
    fp = tree.find_fixed_points(model)
    res = bethe_free_energy(model, fp)
    pc = pair_constants(model, fp)
    loc = local_expectation_pair(model, fp)
    return {"model": model.describe(), "phi": res.phi, "phi_vx": res.phi_vx, "phi_e": res.phi_e,
            "maximizer": res.maximizer, "phi_star": res.phi_star, "phi_pair": res.phi_pair,
            "tie": res.tie, "gamma": pc.gamma, "theta": pc.theta,
            "a_vx": loc.a_vx, "a_e": loc.a_e}


def cmd_gen(args):
    if args.what == "gadget":
        g = make_gadget(args.n, args.d, args.k, seed=args.seed, max_attempts=args.max_attempts)
        if args.out:
            write_gadget(g, args.out)
        return {"seed": args.seed, "n": g.graph.n, "m": g.graph.m, **g.sidecar()}
    H = configuration_model(args.n, args.d, seed=args.seed)
    G = double_cover(H) if args.what == "cover" else H
    if args.out:
        write_graph(G, args.out)
    return {"seed": args.seed, "n": G.n, "m": G.m, "simple": G.is_simple(),
            "edges": [list(e) for e in G.edges]}


def cmd_expand(args):
    G = read_graph(args.graph)
    rep = expansion_check(G, args.delta, args.gamma, args.lam, seed=args.seed)
    return {"passed": rep.passed, "exhaustive": rep.exhaustive, "min_ratio": rep.min_ratio,
            "witness": list(rep.witness) if rep.witness is not None else None,
            "delta": rep.delta, "gamma": rep.gamma, "lambda": rep.lam}


def _int_list(text):
    if not text:
        return []
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise InvalidInput(f"bad vertex list {text!r}") from exc


def cmd_partition(args):
    G = read_graph(args.graph)
    model = _model(args, _graph_degree(G))
    # a raw specification is reduced through its canonical form, which
    # absorbs vertex weights and is exact only on regular graphs
    offset = 0.0
    if args.spec:
        if not G.is_regular(_graph_degree(G)):
            raise InvalidInput("--spec needs a regular graph; use --model otherwise")
        offset = model.B0 * G.m
    if model.degenerate:
        from .twospin import degenerate_free_energy
        phi = degenerate_free_energy(model, G)
        return {"log_z": phi * G.n, "phi": phi}
    s = exact.log_Z(G, model, marginals=_int_list(args.marginals))
    out = {"log_z": s.log_z + offset, "phi": (s.log_z + offset) / G.n}
    if args.phase_split:
        if s.log_z_plus is None:
            raise InvalidInput("--phase-split needs a colored graph")
        out["log_z_plus"] = s.log_z_plus + offset
        out["log_z_minus"] = s.log_z_minus + offset
    if s.marginals is not None:
        out["marginals"] = s.marginals
    return out


def cmd_sample(args):
    from .sampler import ChainConfig, run_chain
    G = read_graph(args.graph)
    model = _model(args, _graph_degree(G))
    cfg = ChainConfig(args.steps, args.burn_in, args.seed, args.init)
    stats = run_chain(G, model, cfg, _int_list(args.watch), keep_trace=bool(args.trace))
    if args.trace:
        with open(args.trace, "w") as fh:
            fh.write("sweep,sum_tau_sigma,phase\n")
            for i, mval in enumerate(stats.trace.tolist()):
                fh.write(f"{i + cfg.burn_in},{mval},{'+' if mval >= 0 else '-'}\n")
    return stats.to_json()


def cmd_maxcut(args):
    from .reduction import maxcut_bruteforce
    return {"maxcut": maxcut_bruteforce(read_graph(args.graph))}


def cmd_reduce(args):
    from .reduction import run_reduction
    H = read_graph(args.H)
    model = _model(args, args.d)
    res = run_reduction(H, model, args.n, args.k, args.eps, seed=args.seed,
                        max_attempts=args.max_attempts, control=args.control,
                        direct=False if args.no_direct else None)
    return res.to_json()


# parser ------------------------------------------------------------------------

def _global_options(p, default):
    def dflt(value):
        return value if default is None else default
    p.add_argument("--pretty", action="store_true", default=dflt(False),
                   help="human-readable table output")
    p.add_argument("--tol", type=float, default=dflt(1e-12), help="solver tolerance")
    p.add_argument("--threads", type=int, default=dflt(None),
                   help="worker threads for parallel kernels")
    p.add_argument("--error-json", action="store_true", default=dflt(False),
                   help="print errors as JSON on stdout")
    p.add_argument("--envelope", action="store_true", default=dflt(False),
                   help="wrap output with command, inputs and wall time")


def build_parser():
    p = argparse.ArgumentParser(prog="spinlab", description=__doc__)
    _global_options(p, None)
    # the same options are accepted after the subcommand name
    common = argparse.ArgumentParser(add_help=False)
    _global_options(common, argparse.SUPPRESS)
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, **kw):
        return sub.add_parser(name, parents=[common], **kw)

    def model_args(sp, need_d=True):
        sp.add_argument("--model", help="hardcore:LAM or ising:BETA,B")
        sp.add_argument("--spec", help="general two-spin JSON literal")
        if need_d:
            sp.add_argument("--d", type=int, required=True)

    sp = add("threshold", help="uniqueness thresholds")
    sp.add_argument("family", choices=["hardcore", "ising"])
    sp.add_argument("--d", type=int, required=True)
    sp.add_argument("--B", type=float, default=0.0)
    sp.add_argument("--beta", type=float, default=None, help="also report B_c for this ferro beta")
    sp.set_defaults(func=cmd_threshold)

    sp = add("fixpoints", help="BP fixed points on the d-regular tree")
    model_args(sp)
    sp.set_defaults(func=cmd_fixpoints)

    sp = add("bethe", help="Bethe free energy and pairing constants")
    model_args(sp)
    sp.set_defaults(func=cmd_bethe)

    sp = add("gen", help="generate graphs")
    sp.add_argument("what", choices=["gadget", "config", "cover"])
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--d", type=int, default=3)
    sp.add_argument("--k", type=int, default=1)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--max-attempts", type=int, default=1000)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_gen)

    sp = add("expand", help="edge-expansion certificate")
    sp.add_argument("--graph", required=True)
    sp.add_argument("--delta", type=float, required=True)
    sp.add_argument("--gamma", type=float, default=0.5)
    sp.add_argument("--lambda", dest="lam", type=float, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_expand)

    sp = add("partition", help="exact partition function")
    sp.add_argument("--graph", required=True)
    model_args(sp, need_d=False)
    sp.add_argument("--phase-split", action="store_true")
    sp.add_argument("--marginals", default="")
    sp.set_defaults(func=cmd_partition)

    sp = add("sample", help="Glauber dynamics")
    sp.add_argument("--graph", required=True)
    model_args(sp, need_d=False)
    sp.add_argument("--steps", type=int, default=10000)
    sp.add_argument("--burn-in", type=int, default=100)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--init", default="all-minus",
                    choices=["all-minus", "phase-plus", "phase-minus", "random"])
    sp.add_argument("--watch", default="")
    sp.add_argument("--trace", help="write a CSV trajectory here")
    sp.set_defaults(func=cmd_sample)

    sp = add("maxcut", help="exact MAX-CUT by brute force")
    sp.add_argument("--graph", required=True)
    sp.set_defaults(func=cmd_maxcut)

    sp = add("reduce", help="partition function to MAX-CUT bounds")
    sp.add_argument("--H", required=True)
    model_args(sp, need_d=False)
    sp.add_argument("--d", type=int, default=3)
    sp.add_argument("--n", type=int, required=True, help="gadget half-size (gadget has 2n vertices)")
    sp.add_argument("--k", type=int, default=1)
    sp.add_argument("--eps", type=float, default=math.inf, help="target epsilon")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--max-attempts", type=int, default=50)
    sp.add_argument("--control", action="store_true", help="run the disjoint-union control")
    sp.add_argument("--no-direct", action="store_true", help="skip enumerating H^G itself")
    sp.set_defaults(func=cmd_reduce)
    return p


def _pretty(obj, indent=0):
    pad = "  " * indent
    lines = []
    for k, v in obj.items():
        if isinstance(v, dict):
            lines.append(f"{pad}{k}:")
            lines.extend(_pretty(v, indent + 1))
        else:
            lines.append(f"{pad}{k:<24} {v}")
    return lines


def run(argv=None):
    """Parse, dispatch and return (exit code, payload)."""
    parser = build_parser()
    args = parser.parse_args(argv)
    exact.set_threads(args.threads)
    tree.configure(args.tol)
    t0 = time.perf_counter()
    out = _clean(args.func(args))
    if args.envelope:
        inputs = {k: v for k, v in vars(args).items() if k != "func"}
        out = {"command": args.command, "inputs": _clean(inputs), "outputs": out,
               "wall_time": time.perf_counter() - t0, "seed": getattr(args, "seed", None)}
    return 0, out, args


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    want_json_err = "--error-json" in argv
    try:
        code, out, args = run(argv)
    except SpinlabError as exc:
        msg = {"error": type(exc).__name__, "message": str(exc), "exit_code": exc.exit_code}
        if want_json_err:
            print(json.dumps(msg))
        else:
            print(f"spinlab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except SystemExit as exc:      # argparse usage errors
        return 2 if exc.code not in (0, None) else 0
    if args.pretty:
        print("\n".join(_pretty(out)))
    else:
        print(json.dumps(out, default=str))
    return code


if __name__ == "__main__":
    sys.exit(main())
