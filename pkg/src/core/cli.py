"""
Command-line front end.

Subcommands: synth, stats, prepare, train, eval, grid. Exit status is 0 on success,
1 for usage and configuration errors, 2 for failures while running the pipeline.
"""
from __future__ import annotations

import argparse
import os
import sys
from dataclasses import fields
from typing import List, Optional

import pandas as pd

from src.core.errors import ConfigError
from src.core.grid import run_grid, write_results
from src.core.pipeline import cached_adjacency, evaluate, prepare
from src.core.run_config import RunConfig, load_run_config
from src.graph.graph_io import generate_sbm_attributed, graph_summary, save_graph
from src.model.trainer import export_embeddings, train
from src.utils.logger import get_app_logger, get_error_logger

logger = get_app_logger()
error_logger = get_error_logger()

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2


class ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_run_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key=value run config file")
    group = parser.add_argument_group("run config overrides")
    for f in fields(RunConfig):
        group.add_argument(f"--{f.name.replace('_', '-')}", dest=f.name, default=argparse.SUPPRESS,
                           metavar=f.name.upper())


def _run_config(args: argparse.Namespace) -> RunConfig:
    known = {f.name for f in fields(RunConfig)}
    overrides = {k: v for k, v in vars(args).items() if k in known}
    config = load_run_config(args.config, overrides)
    config.check_paths()
    return config


def cmd_synth(args: argparse.Namespace) -> int:
    graph = generate_sbm_attributed(args.n_per_block, args.blocks, args.p_in, args.p_out,
                                    args.attr_dim, args.attr_noise, args.seed)
    paths = save_graph(graph, args.out_dir, args.prefix)
    for role, path in paths.items():
        print(f"{role}: {path}")
    return EXIT_OK


def cmd_stats(config: RunConfig) -> int:
    graph = config.load_graph()
    summary = graph_summary(graph)
    summary.update({f"load_{k}": v for k, v in graph.load_report.items()})
    print(pd.DataFrame({"value": pd.Series(summary, dtype=object)}).to_string())
    return EXIT_OK


def cmd_prepare(config: RunConfig) -> int:
    graph = config.load_graph()
    for role, path in prepare(graph, config).items():
        print(f"{role}: {path}")
    return EXIT_OK


def cmd_train(config: RunConfig) -> int:
    graph = config.load_graph()
    result = train(graph, config.model_config(), log_path=config.history_path,
                   resume_from=config.resume, checkpoint_path=config.checkpoint,
                   adjacency=cached_adjacency(graph, config))
    export_embeddings(result.embeddings, graph.node_ids, config.output)
    print(f"embeddings: {config.output}")
    print(f"training log: {config.history_path}")
    print(f"epochs run: {result.epochs_run}" + (" (converged)" if result.converged else ""))
    return EXIT_OK


def cmd_eval(config: RunConfig) -> int:
    graph = config.load_graph()
    report = evaluate(graph, config, log_path=config.history_path)
    report.append_to(config.results)
    print(report.to_table())
    return EXIT_OK


def cmd_grid_search(config: RunConfig, grid_spec=None) -> int:
    graph = config.load_graph()
    log_dir = os.path.join(os.path.dirname(config.grid_output) or ".", "grid_logs")
    table = run_grid(graph, config, grid_spec, log_dir=log_dir)
    write_results(table, config.grid_output)
    print(table.to_string(index=False))
    print("best:")
    print(table.iloc[[0]].to_string(index=False))
    return EXIT_OK


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(prog="danrl", description="Attributed network embedding: train, evaluate, grid-search.")
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="write a stochastic block model attributed graph")
    synth.add_argument("--n-per-block", type=int, default=30)
    synth.add_argument("--blocks", type=int, default=2)
    synth.add_argument("--p-in", type=float, default=0.3)
    synth.add_argument("--p-out", type=float, default=0.02)
    synth.add_argument("--attr-dim", type=int, default=50)
    synth.add_argument("--attr-noise", type=float, default=0.1)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--out-dir", default="data/sbm")
    synth.add_argument("--prefix", default="sbm")

    for name, help_text in (("stats", "print dataset statistics"),
                            ("prepare", "write the R cache and the walk corpus"),
                            ("train", "train embeddings and export them"),
                            ("eval", "run link prediction or node classification"),
                            ("grid", "grid-search eta, psi, chi, alpha, beta, gamma")):
        _add_run_config_flags(sub.add_parser(name, help=help_text))
    return parser


COMMANDS = {"stats": cmd_stats, "prepare": cmd_prepare, "train": cmd_train, "eval": cmd_eval,
            "grid": cmd_grid_search}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logger.info(f"danrl {args.command} started")
    try:
        if args.command == "synth":
            status = cmd_synth(args)
        else:
            status = COMMANDS[args.command](_run_config(args))
    except ConfigError as e:
        error_logger.error(f"{args.command}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as e:
        error_logger.error(f"{args.command} failed: {type(e).__name__}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    logger.info(f"danrl {args.command} finished")
    return status
