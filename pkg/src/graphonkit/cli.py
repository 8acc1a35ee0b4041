"""Command-line entry point: estimate | sample | fit | train | distance | verify | stats."""
import argparse
import csv
import io
import json
import logging
import os
import sys
from typing import Dict, List, Optional

import numpy as np

from .analysis import graph_statistics, motif_gap_report
from .basis import BasisSet, CoefficientEncoder, FitConfig, fit, reconstruct, encode_coefficients
from .graph_io import GraphCorpus, encode_labels, load_corpus, to_edge_list
from .graphon import StepGraphon, sample_graph
from .gw import GwConfig, gw_discrepancy
from .joint import JointConfig, train_joint
from .oracle import OracleConfig, estimate_oracle

logger = logging.getLogger("graphonkit")

LAMBDA_SWEEP = (0.0, 0.05, 0.5, 1.0, 6.0)

_SOLVER = {"beta": 0.1, "outer_iters": 50, "inner_iters": 10}
_CORPUS = {"input": None, "format": "tudataset"}

# built-in defaults per command; the JSON config file and then explicit flags override these
DEFAULTS: Dict[str, Dict] = {
    "estimate": {**_CORPUS, "oracle_size": 100, "barycenter_iters": 10, **_SOLVER, "outer_iters": 20},
    "sample": {"graphon": None, "nodes": 50, "count": 10, "label": None},
    "fit": {**_CORPUS, "oracle": None, "oracle_size": 100, "bases": 32, "basis_size": 50, "epochs": 100,
            "lr": 0.05, "feature_dim": 8, **_SOLVER},
    "train": {**_CORPUS, "oracle": None, "oracle_size": 100, "bases": 32, "basis_size": 50, "epochs": 100,
              "lr": 0.05, "task_lr": 0.5, "feature_dim": 8, "lambda": 1.0, "lambda_sweep": False, **_SOLVER},
    "distance": {"a": None, "b": None, "format": "tudataset", "oracle_size": 100, "barycenter_iters": 10,
                 **_SOLVER},
    "verify": {"oracle": None, "predicted": None, "size": None, "node_count_scale": False},
    "stats": {**_CORPUS},
}
_COMMON = {"seed": 0, "threads": 1, "out": None}
_REQUIRED = {
    "estimate": ["input"], "sample": ["graphon"], "fit": ["input"], "train": ["input"],
    "distance": ["a", "b"], "verify": ["oracle", "predicted"], "stats": ["input"],
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _add_solver(p):
    p.add_argument("--beta", type=float, help="KL proximal weight")
    p.add_argument("--outer-iters", type=int, help="proximal steps per GW solve")
    p.add_argument("--inner-iters", type=int, help="Sinkhorn scalings per proximal step")


def _add_corpus(p):
    p.add_argument("--input", help="TUDataset folder or folder of edge-list files")
    p.add_argument("--format", choices=["tudataset", "edgelist"])


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="graphonkit", description=__doc__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def command(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON file with parameter values; flags take precedence")
        p.add_argument("--seed", type=int, help="seed for every random draw (default 0)")
        p.add_argument("--threads", type=int, help="worker cap for per-graph solves (default 1)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--log-level", default="WARNING", help="stderr logging level")
        return p

    p = command("estimate", "estimate the oracle graphon of a corpus")
    _add_corpus(p)
    p.add_argument("--oracle-size", type=int, help="blocks D of the oracle (default 100)")
    p.add_argument("--barycenter-iters", type=int, help="barycenter sweeps (default 10)")
    _add_solver(p)

    p = command("sample", "sample graphs from a graphon JSON file")
    p.add_argument("--graphon", help="graphon JSON file")
    p.add_argument("--nodes", type=int, help="nodes per graph (default 50)")
    p.add_argument("--count", type=int, help="number of graphs (default 10)")
    p.add_argument("--label", type=int, help="class label written into every graph")

    for name, text in (("fit", "fit graphon bases and the coefficient encoder"),
                       ("train", "train the toy classifier jointly with the reconstruction loss")):
        p = command(name, text)
        _add_corpus(p)
        p.add_argument("--oracle", help="oracle graphon JSON; estimated from the corpus when omitted")
        p.add_argument("--oracle-size", type=int, help="blocks D when estimating the oracle (default 100)")
        p.add_argument("--bases", type=int, help="number of bases C (default 32)")
        p.add_argument("--basis-size", type=int, help="basis resolution M (default 50)")
        p.add_argument("--epochs", type=int, help="epochs (default 100)")
        p.add_argument("--lr", type=float, help="basis/encoder learning rate (default 0.05)")
        p.add_argument("--feature-dim", type=int, help="structural feature length (default 8)")
        _add_solver(p)
        if name == "train":
            p.add_argument("--lambda", dest="lambda", type=float, help="reconstruction weight (default 1.0)")
            p.add_argument("--task-lr", type=float, help="classifier learning rate (default 0.5)")
            p.add_argument("--lambda-sweep", action="store_true", default=None,
                           help="also train at lambda in 0, 0.05, 0.5, 1, 6 and write lambda_sweep.csv")

    p = command("distance", "GW discrepancy and statistic deltas between two corpora")
    p.add_argument("--a", help="first corpus")
    p.add_argument("--b", help="second corpus")
    p.add_argument("--format", choices=["tudataset", "edgelist"])
    p.add_argument("--oracle-size", type=int, help="blocks D of both oracles (default 100)")
    p.add_argument("--barycenter-iters", type=int, help="barycenter sweeps (default 10)")
    _add_solver(p)

    p = command("verify", "motif density gaps against the counting-lemma bound")
    p.add_argument("--oracle", help="oracle graphon JSON")
    p.add_argument("--predicted", help="reconstructed graphon JSON")
    p.add_argument("--size", type=int, help="common grid for the comparison")
    p.add_argument("--node-count-scale", action="store_true", default=None,
                   help="mark holds against the node-count scaled bound instead of edge count")

    p = command("stats", "corpus graph statistics")
    _add_corpus(p)
    return parser


def resolve(command: str, args: argparse.Namespace) -> Dict:
    """Merge defaults, config file and explicit flags (in that order of precedence)."""
    cfg = {**_COMMON, **DEFAULTS[command]}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise UsageError("config file must hold a JSON object")
        data.pop("command", None)
        unknown = sorted(set(data) - set(cfg))
        if unknown:
            raise UsageError(f"unknown config key(s) for {command}: {', '.join(unknown)}")
        cfg.update(data)
    for key in cfg:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    missing = [k for k in _REQUIRED[command] if cfg.get(k) is None]
    if missing:
        raise UsageError(f"{command}: missing required value(s): {', '.join('--' + m for m in missing)}")
    if cfg["out"] is None:
        raise UsageError(f"{command}: --out is required")
    return cfg


def _gw(cfg: Dict) -> GwConfig:
    return GwConfig(beta=cfg["beta"], outer_iters=cfg["outer_iters"], inner_sinkhorn_iters=cfg["inner_iters"])


def _write(out: str, name: str, text: str) -> None:
    with open(os.path.join(out, name), "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _csv(header: List[str], rows: List[List]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1) + "\n"


def _load_graphon(path: str) -> StepGraphon:
    with open(path, encoding="utf-8") as fh:
        return StepGraphon.from_json(fh.read())


def _oracle_for(corpus: GraphCorpus, cfg: Dict) -> StepGraphon:
    if cfg.get("oracle"):
        return _load_graphon(cfg["oracle"])
    ocfg = OracleConfig(oracle_size=cfg["oracle_size"], seed=cfg["seed"], gw=GwConfig(outer_iters=20))
    return estimate_oracle(corpus, ocfg, workers=cfg["threads"])


def _fit_config(cfg: Dict) -> FitConfig:
    return FitConfig(learning_rate=cfg["lr"], epochs=cfg["epochs"], gw=_gw(cfg), seed=cfg["seed"],
                     feature_dim=cfg["feature_dim"])


def _model_json(bases: BasisSet, enc: CoefficientEncoder) -> Dict:
    return {
        "bases": [w.to_dict() for w in bases.to_graphons()],
        "logits": bases.logits.tolist(),
        "encoder": {"weight": enc.weight.tolist(), "bias": enc.bias.tolist()},
    }


def cmd_estimate(cfg: Dict) -> None:
    corpus = load_corpus(cfg["input"], cfg["format"])
    ocfg = OracleConfig(oracle_size=cfg["oracle_size"], gw=_gw(cfg), barycenter_iters=cfg["barycenter_iters"],
                        seed=cfg["seed"])
    w = estimate_oracle(corpus, ocfg, workers=cfg["threads"])
    _write(cfg["out"], "oracle.json", _dump(w.to_dict()))
    _write(cfg["out"], "oracle.csv", w.to_csv())


def cmd_sample(cfg: Dict) -> None:
    w = _load_graphon(cfg["graphon"])
    rng = np.random.default_rng(cfg["seed"])
    seeds = rng.integers(0, 2 ** 63 - 1, size=cfg["count"])
    width = max(4, len(str(cfg["count"] - 1)))
    for i, s in enumerate(seeds):
        g = sample_graph(w, cfg["nodes"], int(s))
        if cfg["label"] is not None:
            g = type(g)(g.adjacency, cfg["label"])
        _write(cfg["out"], f"graph_{i:0{width}d}.txt", to_edge_list(g))


def cmd_fit(cfg: Dict) -> None:
    corpus = load_corpus(cfg["input"], cfg["format"])
    oracle = _oracle_for(corpus, cfg)
    bases, enc, history = fit(corpus, oracle, cfg["bases"], cfg["basis_size"], _fit_config(cfg))
    _write(cfg["out"], "bases.json", _dump(_model_json(bases, enc)))
    _write(cfg["out"], "history.csv", _csv(["epoch", "loss"], [[i, v] for i, v in enumerate(history)]))
    # mean reconstruction over the corpus, handy as --predicted for verify
    alpha = np.mean([encode_coefficients(enc, g) for g in corpus], axis=0)
    _write(cfg["out"], "reconstruction.json", _dump(reconstruct(bases, alpha / alpha.sum()).to_dict()))


def _joint_config(cfg: Dict, lam: float) -> JointConfig:
    return JointConfig(lam=lam, fit=_fit_config(cfg), classes=cfg["classes"], bases=cfg["bases"],
                       basis_size=cfg["basis_size"], task_learning_rate=cfg["task_lr"])


def cmd_train(cfg: Dict) -> None:
    corpus = encode_labels(load_corpus(cfg["input"], cfg["format"]))
    cfg = {**cfg, "classes": len(set(corpus.labels))}
    oracle = _oracle_for(corpus, cfg)
    clf, bases, enc, history = train_joint(corpus, oracle, _joint_config(cfg, cfg["lambda"]))
    rows = [[i, r.task_loss, r.recon_loss, r.total_loss, r.train_accuracy] for i, r in enumerate(history)]
    _write(cfg["out"], "history.csv",
           _csv(["epoch", "task_loss", "recon_loss", "total_loss", "train_accuracy"], rows))
    model = _model_json(bases, enc)
    model["classifier"] = {"weight": clf.weight.tolist(), "bias": clf.bias.tolist()}
    _write(cfg["out"], "model.json", _dump(model))
    if cfg["lambda_sweep"]:
        sweep = []
        for lam in LAMBDA_SWEEP:
            _, _, _, h = train_joint(corpus, oracle, _joint_config(cfg, lam))
            descent = bool(h[-1].total_loss <= h[0].total_loss) if h else True
            last = h[-1] if h else None
            sweep.append([lam, last.train_accuracy if last else float("nan"),
                          last.recon_loss if last else float("nan"), descent])
        _write(cfg["out"], "lambda_sweep.csv",
               _csv(["lambda", "train_accuracy", "recon_loss", "descent_ok"], sweep))


def cmd_distance(cfg: Dict) -> None:
    ocfg = OracleConfig(oracle_size=cfg["oracle_size"], gw=GwConfig(outer_iters=20),
                        barycenter_iters=cfg["barycenter_iters"], seed=cfg["seed"])
    ca = load_corpus(cfg["a"], cfg["format"])
    cb = load_corpus(cfg["b"], cfg["format"])
    wa = estimate_oracle(ca, ocfg, workers=cfg["threads"])
    wb = estimate_oracle(cb, ocfg, workers=cfg["threads"])
    d = gw_discrepancy(wa, wb, _gw(cfg))
    sa, sb = graph_statistics(ca), graph_statistics(cb)
    keys = ["density", "transitivity", "average_degree", "average_clustering"]
    _write(cfg["out"], "distance.csv",
           _csv(["gw_discrepancy"] + [f"delta_{k}" for k in keys], [[d] + [sb[k] - sa[k] for k in keys]]))


def cmd_verify(cfg: Dict) -> None:
    report = motif_gap_report(_load_graphon(cfg["oracle"]), _load_graphon(cfg["predicted"]), size=cfg["size"])
    rows = []
    for r in report:
        holds = r["lhs"] <= r["rhs_nodes"] + 1e-9 if cfg["node_count_scale"] else r["holds"]
        rows.append([r["motif"], r["lhs"], r["rhs"], r["rhs_nodes"], holds])
    _write(cfg["out"], "verify.csv", _csv(["motif", "lhs", "rhs", "rhs_nodes", "holds"], rows))


def cmd_stats(cfg: Dict) -> None:
    stats = graph_statistics(load_corpus(cfg["input"], cfg["format"]))
    keys = sorted(stats)
    _write(cfg["out"], "stats.csv", _csv(keys, [[stats[k] for k in keys]]))


HANDLERS = {
    "estimate": cmd_estimate, "sample": cmd_sample, "fit": cmd_fit, "train": cmd_train,
    "distance": cmd_distance, "verify": cmd_verify, "stats": cmd_stats,
}


def run(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            parser.print_usage(sys.stderr)
            raise UsageError("a subcommand is required")
        logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                            format="%(asctime)s %(levelname)s %(name)s: %(message)s", stream=sys.stderr)
        cfg = resolve(args.command, args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:
        # --help exits 0 through argparse
        return int(exc.code or 0)
    except (OSError, ValueError) as exc:
        print(f"graphonkit: error: {exc}", file=sys.stderr)
        return 1
    try:
        os.makedirs(cfg["out"], exist_ok=True)
        _write(cfg["out"], "resolved_config.json", _dump({"command": args.command, **cfg}))
        HANDLERS[args.command](cfg)
    except Exception as exc:  # runtime failures map to exit code 2
        logger.error("%s failed: %s", args.command, exc)
        return 2
    return 0


def main() -> None:
    sys.exit(run())
