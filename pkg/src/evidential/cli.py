"""Command-line entry point.

Exit codes: 0 success, 1 invalid input or configuration, 2 runtime failure
(including an oracle suite with failing rows).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import datasets as ds
from . import demos
from . import harness as h
from . import losses as ls
from . import oracle
from . import regression as rg
from .special_fn import DomainError


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _out_dir(args) -> Path | None:
    if args.out is None:
        return None
    p = Path(args.out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _emit(out: Path | None, name: str, text: str):
    if out is None:
        sys.stdout.write(text)
    else:
        (out / name).write_text(text, encoding="utf-8")


def _load_config(args) -> h.RunConfig:
    if args.config is None:
        raise h.ConfigError("--config is required")
    cfg = h.RunConfig.from_json(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def cmd_oracle(args) -> int:
    n = oracle.DEFAULT_N if args.n is None else args.n
    rows = oracle.run_suite(args.suite or "all", n=n, seed=args.seed or 0, n_cases=args.cases)
    _emit(_out_dir(args), "oracle.csv", oracle.rows_to_csv(rows))
    bad = [r.quantity for r in rows if not r.passed]
    if bad:
        print(f"{len(bad)} of {len(rows)} oracle rows failed: {', '.join(bad[:10])}", file=sys.stderr)
        return 2
    return 0


def cmd_train(args) -> int:
    cfg = _load_config(args)
    model = h.train_classifier(cfg)
    out = _out_dir(args) or (Path(cfg.out_dir) if cfg.out_dir else None)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    _emit(out, "model.json", h.model_to_json(model))
    if out is not None:
        (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n", "utf-8")
        lines = ["epoch,loss"] + [f"{i},{v!r}" for i, v in enumerate(model.history)]
        (out / "history.csv").write_text("\n".join(lines) + "\n", "utf-8")
    return 0


def cmd_eval(args) -> int:
    cfg = _load_config(args)
    data = h.build_dataset(cfg.dataset, cfg.seed)
    if args.model:
        model = h.model_from_json(Path(args.model).read_text(encoding="utf-8"))
    else:
        model = h.train_classifier(cfg, data)
    report = h.evaluate(model, data, cfg.score)
    out = _out_dir(args)
    _emit(out, "report.json", report.to_json())
    if out is not None:
        (out / "uncertainty.csv").write_text(report.table_csv(), "utf-8")
    return 0


def _floats(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",")])
    except ValueError as e:
        raise h.ConfigError(f"expected comma-separated numbers, got {text!r}") from e


def cmd_simplex(args) -> int:
    if args.alphas is not None:
        alpha = _floats(args.alphas)
    elif args.model and args.x:
        model = h.model_from_json(Path(args.model).read_text(encoding="utf-8"))
        alpha = h.predict_alphas(model, _floats(args.x)[None, :])[0]
    else:
        raise h.ConfigError("simplex needs --alphas, or --model with --x")
    grid = h.simplex_grid(alpha, args.n or 30)
    _emit(_out_dir(args), "simplex.csv", h.simplex_csv(grid))
    return 0


def cmd_losses(args) -> int:
    for k in ls.registry_keys():
        print(k)
    for k in rg.REGRESSION_LOSSES:
        print(k)
    return 0


def cmd_datasets(args) -> int:
    name = args.name or "clusters"
    seed = args.seed or 0
    if name == "iris":
        data = ds.load_iris()
    elif name == "clusters":
        data = ds.gen_gaussian_clusters(seed=seed, n_per_class=args.n or 100)
    elif name == "spirals":
        data = ds.gen_spirals(n=args.n or 300, seed=seed)
    elif name == "poly":
        data = ds.gen_poly_regression(n=args.n or 1000, seed=seed)
    else:
        raise h.ConfigError(f"unknown dataset {name!r}; known: iris, clusters, spirals, poly")
    _emit(_out_dir(args), f"{name}.csv", data.to_csv())
    return 0


def cmd_demo_iris(args) -> int:
    demo = demos.run_iris_demo(seed=args.seed or 0)
    out = _out_dir(args)
    _emit(out, "probes.csv", demo.probe_csv())
    if out is not None:
        (out / "grid.csv").write_text(demo.grid_csv(), "utf-8")
        for k, g in demo.simplex.items():
            (out / f"simplex_{k}.csv").write_text(h.simplex_csv(g), "utf-8")
        (out / "model.json").write_text(h.model_to_json(demo.model), "utf-8")
    print(f"train accuracy {demo.accuracy:.4f}", file=sys.stderr)
    return 0


COMMANDS = {
    "oracle": cmd_oracle,
    "train": cmd_train,
    "eval": cmd_eval,
    "simplex": cmd_simplex,
    "losses": cmd_losses,
    "datasets": cmd_datasets,
    "demo-iris": cmd_demo_iris,
}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed (non-negative)")
    common.add_argument("--out", default=None, help="output directory; stdout when omitted")

    p = _Parser(prog="evidential", description="Evidential deep learning toolkit")
    sub = p.add_subparsers(dest="verb", metavar="VERB", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("oracle", parents=[common], help="compare closed forms with Monte Carlo / quadrature")
    s.add_argument("--suite", default="all", help="all, " + ", ".join(oracle.SUITES))
    s.add_argument("--n", type=int, default=None, help="Monte Carlo samples per case")
    s.add_argument("--cases", type=int, default=50, help="randomized cases per quantity")

    for verb, text in (("train", "train a classifier from a JSON run config"),
                       ("eval", "evaluate a trained or freshly trained model")):
        s = sub.add_parser(verb, parents=[common], help=text)
        s.add_argument("--config", default=None, help="JSON run config")
        if verb == "eval":
            s.add_argument("--model", default=None, help="model.json written by train")

    s = sub.add_parser("simplex", parents=[common], help="Dirichlet density on a K=3 simplex grid")
    s.add_argument("--alphas", default=None, help="comma-separated concentrations")
    s.add_argument("--model", default=None)
    s.add_argument("--x", default=None, help="comma-separated input features for --model")
    s.add_argument("--n", type=int, default=None, help="grid resolution")

    sub.add_parser("losses", parents=[common], help="list registered loss keys")

    s = sub.add_parser("datasets", parents=[common], help="export a dataset as CSV")
    s.add_argument("--name", default=None, help="iris, clusters, spirals or poly")
    s.add_argument("--n", type=int, default=None)

    sub.add_parser("demo-iris", parents=[common], help="Iris prior-network demo")
    return p


def run(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.seed is not None and args.seed < 0:
            raise UsageError("--seed must be non-negative")
        if getattr(args, "n", None) is not None and args.n < 1:
            raise UsageError("--n must be positive")
        return COMMANDS[args.verb](args)
    except UsageError as e:
        print(e, file=sys.stderr)
        return 1
    except SystemExit as e:  # --help
        return int(e.code or 0)
    except (h.ConfigError, DomainError, KeyError, ValueError, FileNotFoundError) as e:
        msg = e.args[0] if isinstance(e, KeyError) and e.args else e
        print(f"error: {msg}", file=sys.stderr)
        return 1
    except Exception as e:  # noqa: BLE001
        print(f"runtime failure: {type(e).__name__}: {e}", file=sys.stderr)
        return 2


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
