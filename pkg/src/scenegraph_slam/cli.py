"""Command-line front end: simulate, detect, optimize, evaluate, export, config.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
Failures print one line to stderr: ``sgslam-error <kind>: <message>``.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import atlas
from .config import ConfigError, RunConfig, load_config
from .evaluation import evaluate_graph, format_table, metrics_json, plot_svg
from .export import to_dot, write_components_ply
from .optim import ProblemError, build_problem, dump_problem, solve, write_back
from .pipeline import detect, integrate_poses
from .presets import PRESETS
from .sequence import SequenceError, load_manifest, parse_odometry, pose_from_list, read_sequence, write_sequence
from .synthetic import WorldSpec, WorldSpecError, generate_world, render_keyframes

log = logging.getLogger("scenegraph_slam")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _common(suppress: bool) -> argparse.ArgumentParser:
    # subcommands repeat the global flags without defaults so they never mask earlier values
    dflt = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", metavar="PATH", default=dflt(None), help="run configuration JSON")
    p.add_argument("--seed", type=int, default=dflt(None), help="random seed")
    p.add_argument(
        "--set", dest="overrides", action="append", default=dflt([]), metavar="K=V", help="override a config key"
    )
    p.add_argument("-v", "--verbose", action="count", default=dflt(0))
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common(suppress=True)
    parser = _Parser(prog="sgslam", description=__doc__.splitlines()[0], parents=[_common(suppress=False)])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("simulate", parents=[common], help="render a synthetic sequence")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("spec", nargs="?", help="world spec JSON")
    src.add_argument("--preset", choices=sorted(PRESETS), help="built-in world")
    s.add_argument("--out", required=True, metavar="DIR")

    d = sub.add_parser("detect", parents=[common], help="build a scene graph from a sequence")
    d.add_argument("sequence", help="sequence directory or manifest.json")
    d.add_argument("--out", required=True, metavar="PATH")

    o = sub.add_parser("optimize", parents=[common], help="jointly refine a scene graph")
    o.add_argument("graph")
    o.add_argument("--manifest", required=True, help="sequence manifest (odometry source)")
    o.add_argument("--out", required=True, metavar="PATH")
    o.add_argument("--trace", metavar="PATH", help="cost trace JSON (default: <out>.trace.json)")
    o.add_argument("--dump-problem", metavar="PATH", help="write the factor graph as text")

    e = sub.add_parser("evaluate", parents=[common], help="score a graph against ground truth")
    e.add_argument("graph")
    e.add_argument("--truth", required=True, help="ground_truth.json")
    e.add_argument("--manifest", help="manifest for the odometry-only ATE (default: next to --truth)")
    e.add_argument("--out", required=True, metavar="PATH", help="metrics JSON")
    e.add_argument("--table", metavar="PATH")
    e.add_argument("--plot", metavar="PATH", help="SVG plot")

    x = sub.add_parser("export", parents=[common], help="export a graph as DOT or PLY")
    x.add_argument("graph")
    x.add_argument("--format", required=True, choices=["dot", "ply"])
    x.add_argument("--out", required=True, metavar="PATH")

    c = sub.add_parser("config", parents=[common], help="show the effective configuration")
    c.add_argument("--dump", action="store_true", help="print every setting with its value")
    c.add_argument("--out", metavar="PATH")
    return parser


def _read_json(path, what: str):
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"{what} not found: {p}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"{what} {p}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc


def _load_graph(path) -> atlas.SceneGraph:
    return atlas.deserialize(_read_json(path, "graph"))


def _write(path, text: str) -> None:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(text)


def cmd_simulate(args, cfg: RunConfig) -> int:
    if args.preset:
        spec = PRESETS[args.preset](0)
    else:
        spec = WorldSpec.from_dict(_read_json(args.spec, "world spec"))
    seed = args.seed if args.seed is not None else cfg.seed if cfg.seed is not None else spec.seed
    spec.seed = seed
    world = generate_world(spec)
    if not world.trajectory:
        raise UsageError("world spec has no trajectory")
    rendered = render_keyframes(world, noise=cfg.noise, camera=cfg.camera, seed=seed)
    seq_id = f"{spec.name}-seed{seed}"
    write_sequence(args.out, world, rendered, seq_id, seed)
    print(f"wrote {len(rendered.keyframes)} keyframes to {args.out} ({seq_id}); counts {json.dumps(world.counts, sort_keys=True)}")
    return EXIT_OK


def cmd_detect(args, cfg: RunConfig) -> int:
    seq = read_sequence(args.sequence)
    if not seq.keyframes:
        raise RuntimeError("sequence has no readable keyframes")
    seed = args.seed if args.seed is not None else cfg.seed if cfg.seed is not None else seq.seed
    g = detect(
        seq.keyframes,
        seq.odometry,
        seq.start_pose,
        cfg.recognition,
        cfg.association,
        cfg.structural,
        seq.marker_db or None,
        seq.class_ids or None,
        seed,
        seq.sequence_id,
    )
    _write(args.out, atlas.dumps(g) + "\n")
    print(f"graph: {len(g.keyframes)} keyframes, {len(g.components)} components, {len(g.rooms)} rooms, "
          f"{0 if g.floor is None else 1} floor -> {args.out}")
    return EXIT_OK


def cmd_optimize(args, cfg: RunConfig) -> int:
    g = _load_graph(args.graph)
    manifest = load_manifest(args.manifest)
    if manifest.get("sequence_id", "") != g.sequence_id:
        raise UsageError(f"sequence id mismatch: graph {g.sequence_id!r} vs manifest {manifest.get('sequence_id')!r}")
    prob = build_problem(g, parse_odometry(manifest), cfg.factors, cfg.solver)
    if args.dump_problem:
        _write(args.dump_problem, dump_problem(prob))
    result = solve(prob)
    write_back(g, result.values)
    _write(args.out, atlas.dumps(g) + "\n")
    trace = {
        "cost_trace": result.cost_trace,
        "iterations": result.iterations,
        "converged": result.converged,
        "reason": result.reason,
    }
    _write(args.trace or f"{args.out}.trace.json", json.dumps(trace, indent=1) + "\n")
    print(f"cost {result.cost_trace[0]:.6g} -> {result.cost_trace[-1]:.6g} in {result.iterations} iterations ({result.reason})")
    return EXIT_OK


def cmd_evaluate(args, cfg: RunConfig) -> int:
    g = _load_graph(args.graph)
    truth = _read_json(args.truth, "ground truth")
    if truth.get("sequence_id", "") != g.sequence_id:
        raise UsageError(f"sequence id mismatch: graph {g.sequence_id!r} vs truth {truth.get('sequence_id')!r}")
    mpath = Path(args.manifest) if args.manifest else Path(args.truth).with_name("manifest.json")
    odo = None
    if mpath.exists():
        manifest = load_manifest(mpath)
        start = pose_from_list(manifest["start_pose"], "start_pose")
        ids = [int(k["id"]) for k in manifest["keyframes"]]
        odo = integrate_poses(start, ids, parse_odometry(manifest))
    doc = evaluate_graph(g, truth, cfg.evaluation, odo)
    _write(args.out, metrics_json(doc))
    table = format_table(doc)
    if args.table:
        _write(args.table, table)
    if args.plot:
        Path(args.plot).parent.mkdir(parents=True, exist_ok=True)
        plot_svg(doc, args.plot)
    sys.stdout.write(table)
    return EXIT_OK


def cmd_export(args, cfg: RunConfig) -> int:
    g = _load_graph(args.graph)
    if args.format == "dot":
        _write(args.out, to_dot(g))
    else:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        n = write_components_ply(g, args.out)
        print(f"wrote {n} points to {args.out}")
    return EXIT_OK


def cmd_config(args, cfg: RunConfig) -> int:
    text = cfg.dumps()
    if args.out:
        _write(args.out, text)
    if args.dump or not args.out:
        sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "detect": cmd_detect,
    "optimize": cmd_optimize,
    "evaluate": cmd_evaluate,
    "export": cmd_export,
    "config": cmd_config,
}


def _fail(kind: str, msg, code: int) -> int:
    text = " ".join(str(msg).split())
    print(f"sgslam-error {kind}: {text}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            raise UsageError("a subcommand is required")
    except UsageError as exc:
        return _fail("usage", exc, EXIT_USAGE)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        cfg = load_config(args.config, args.overrides)
        return COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        return _fail("usage", exc, EXIT_USAGE)
    except ConfigError as exc:
        return _fail("config", exc, EXIT_USAGE)
    except FileNotFoundError as exc:
        return _fail("input", exc, EXIT_USAGE)
    except (WorldSpecError, atlas.GraphFormatError, SequenceError) as exc:
        return _fail("input", exc, EXIT_USAGE)
    except ProblemError as exc:
        return _fail("runtime", exc, EXIT_RUNTIME)
    except Exception as exc:  # noqa: BLE001 - last-resort boundary
        log.debug("unhandled failure", exc_info=True)
        return _fail("runtime", f"{type(exc).__name__}: {exc}", EXIT_RUNTIME)


if __name__ == "__main__":
    sys.exit(main())
