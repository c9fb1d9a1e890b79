"""Command-line pipelines: ``train``, ``evaluate``, ``generate``, ``export``.

Values resolve as command-line flag, then ``--config`` JSON file, then the
built-in defaults.  Every file written carries the resolved configuration.
Exit status is 0 on success, 2 on usage or configuration errors and 1 on
runtime failures.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .agents import TrainConfig, run_manela, write_audit_log, write_run_stats
from .baselines import WalkConfig, deepwalk_budget, run_deepwalk
from .embedding import Embedding, load_embedding, save_embedding
from .evaluation import (
    link_prediction_experiment,
    node_classification_experiment,
    pearson_degree_counts,
    rn_predictor,
)
from .graph import GraphParseError, LabelSet, generate_sbm, parse_edge_list, parse_labels, write_sbm
from .sampler import RatioVector

logger = logging.getLogger("manela")

DEFAULTS = {
    "algo": "manela",
    "edges": None,
    "labels": None,
    "embedding": None,
    "stats": None,
    "r1": 0.5,
    "w": 10,
    "ell": 80,
    "gamma": 10,
    "kappa": 5,
    "dim": None,  # 128 for training; unset means "any" when evaluating
    "alpha0": 0.025,
    "budget": None,
    "seed": 0,
    "threads": 1,
    "out_dir": ".",
    "ratios": [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9],
    "repeats": 10,
    "runs": 10,
    "sample_nodes": 1024,
    "ks": [1, 10, 100, 1000, 10000],
    "mode": "classify",
    "audit": False,
    "n": 1024,
    "communities": 3,
    "p_in": 0.1,
    "p_out": 0.01,
    "bins": 20,
}


class UsageError(Exception):
    pass


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x]


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="manela", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON file of parameter values")
        p.add_argument("--seed", type=int)
        p.add_argument("--out-dir", dest="out_dir")

    def training(p):
        p.add_argument("--algo", choices=["manela", "deepwalk"])
        p.add_argument("--edges")
        p.add_argument("--r1", type=float)
        p.add_argument("--w", type=int)
        p.add_argument("--ell", type=int)
        p.add_argument("--gamma", type=int)
        p.add_argument("--kappa", type=int)
        p.add_argument("--dim", type=int)
        p.add_argument("--alpha0", type=float)
        p.add_argument("--budget", type=int, help="update pairs (default: DeepWalk parity)")
        p.add_argument("--threads", type=int)

    p = sub.add_parser("train", help="learn an embedding")
    common(p)
    training(p)
    p.add_argument("--audit", action="store_true", default=None, help="write the topology access log")

    p = sub.add_parser("evaluate", help="classification, RN or link-prediction experiments")
    common(p)
    training(p)
    p.add_argument("--mode", choices=["classify", "rn", "linkpred"])
    p.add_argument("--embedding")
    p.add_argument("--labels")
    p.add_argument("--ratios", type=_floats)
    p.add_argument("--repeats", type=int)
    p.add_argument("--runs", type=int)
    p.add_argument("--sample-nodes", dest="sample_nodes", type=int)
    p.add_argument("--ks", type=_ints)

    p = sub.add_parser("generate", help="write a stochastic block model dataset")
    common(p)
    p.add_argument("--n", type=int)
    p.add_argument("--communities", type=int)
    p.add_argument("--p-in", dest="p_in", type=float)
    p.add_argument("--p-out", dest="p_out", type=float)

    p = sub.add_parser("export", help="projection inputs and degree/update tables")
    common(p)
    p.add_argument("--stats")
    p.add_argument("--embedding")
    p.add_argument("--labels")
    p.add_argument("--bins", type=int)
    return parser


def resolve(args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        try:
            loaded = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = set(loaded) - set(DEFAULTS)
        if unknown:
            raise UsageError(f"unknown config key(s): {', '.join(sorted(unknown))}")
        cfg.update(loaded)
    for key, value in vars(args).items():
        if key in DEFAULTS and value is not None:
            cfg[key] = value
    cfg["command"] = args.command
    return cfg


def _require_file(cfg: dict, key: str) -> Path:
    value = cfg.get(key)
    if not value:
        raise UsageError(f"--{key.replace('_', '-')} is required")
    path = Path(value)
    if not path.is_file():
        raise UsageError(f"{key} file not found: {path}")
    return path


def _header(cfg: dict) -> str:
    return f"# config: {json.dumps(cfg, sort_keys=True)}\n"


def _train_configs(cfg: dict, net) -> tuple[WalkConfig, TrainConfig | None]:
    walk = WalkConfig(gamma=cfg["gamma"], ell=cfg["ell"], w=cfg["w"], m=cfg["dim"] or 128,
                      kappa=cfg["kappa"], alpha0=cfg["alpha0"], seed=cfg["seed"])
    budget = cfg["budget"] if cfg["budget"] is not None else deepwalk_budget(net, walk)
    if cfg["algo"] == "deepwalk":
        return walk, None
    train = TrainConfig(m=cfg["dim"] or 128, w=cfg["w"], r=RatioVector.from_r1(cfg["r1"]), kappa=cfg["kappa"],
                        alpha0=cfg["alpha0"], budget_pairs=budget, seed=cfg["seed"], threads=cfg["threads"])
    return walk, train


def _train(cfg: dict, net, audit: bool = False):
    walk, train = _train_configs(cfg, net)
    if train is None:
        if cfg["budget"] is not None:
            logger.warning("--budget is ignored for deepwalk; its pair count follows gamma, ell and w")
        return run_deepwalk(net, walk)
    return run_manela(net, train, audit=audit)


def cmd_train(cfg: dict) -> int:
    net = parse_edge_list(_require_file(cfg, "edges"))
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    emb, stats = _train(cfg, net, audit=bool(cfg["audit"]))
    elapsed = time.perf_counter() - start
    save_embedding(emb, out / "embedding.txt")
    (out / "embedding.txt.config.json").write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n")
    write_run_stats(stats, net, out / "stats.tsv", _header(cfg))
    if cfg["audit"]:
        write_audit_log(stats, net, out / "audit.tsv", _header(cfg))
    print(f"update pairs: {stats.total_pairs}")
    print(f"elapsed: {elapsed:.2f}s")
    return 0


def _labels_for(cfg: dict, node_names) -> LabelSet:
    return parse_labels(_require_file(cfg, "labels"), list(node_names))


def cmd_evaluate(cfg: dict) -> int:
    out = Path(cfg["out_dir"])
    rng = np.random.default_rng(cfg["seed"])
    mode = cfg["mode"]
    if mode == "classify":
        emb = load_embedding(_require_file(cfg, "embedding"))
        if cfg["dim"] is not None and cfg["dim"] != emb.m:
            raise UsageError(f"embedding has dimension {emb.m}, request says {cfg['dim']}")
        labels = _labels_for(cfg, emb.node_names)
        report = node_classification_experiment(emb, labels, cfg["ratios"], cfg["repeats"], rng)
    elif mode == "rn":
        net = parse_edge_list(_require_file(cfg, "edges"))
        labels = _labels_for(cfg, net.node_names)
        dummy = Embedding(np.zeros((net.node_count, 1)), net.node_names)
        report = node_classification_experiment(dummy, labels, cfg["ratios"], cfg["repeats"], rng,
                                                predictor=rn_predictor(net, labels))
    elif mode == "linkpred":
        net = parse_edge_list(_require_file(cfg, "edges"))

        def trainer(train_net, seed):
            return _train({**cfg, "seed": seed}, train_net)[0]

        report = link_prediction_experiment(net, trainer, cfg["runs"], cfg["sample_nodes"], rng,
                                            ks=cfg["ks"])
    else:
        raise UsageError(f"unknown mode {mode!r}")
    report.config = {"command": cfg, **report.config}
    paths = report.write(out / mode)
    print(report.to_table(), end="")
    print(f"wrote {', '.join(str(p) for p in paths.values())}")
    return 0


def cmd_generate(cfg: dict) -> int:
    rng = np.random.default_rng(cfg["seed"])
    try:
        net, labels = generate_sbm(cfg["n"], cfg["communities"], cfg["p_in"], cfg["p_out"], rng)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    sizes = np.bincount([next(iter(s)) for s in labels.labels], minlength=labels.label_count)
    meta = {"config": cfg, "seed": cfg["seed"], "community_sizes": sizes.tolist(),
            "node_count": net.node_count, "edge_count": net.edge_count}
    paths = write_sbm(Path(cfg["out_dir"]), net, labels, meta)
    print(f"nodes: {net.node_count}  edges: {net.edge_count}  sizes: {sizes.tolist()}")
    print(f"wrote {', '.join(str(p) for p in paths.values())}")
    return 0


def _read_stats(path: Path) -> tuple[list[str], np.ndarray, np.ndarray]:
    names, deg, cnt = [], [], []
    for line in path.read_text().splitlines():
        if not line or line.startswith("#") or line.startswith("node\t"):
            continue
        a, b, c = line.split("\t")
        names.append(a)
        deg.append(int(b))
        cnt.append(int(c))
    return names, np.array(deg), np.array(cnt)


def cmd_export(cfg: dict) -> int:
    if not cfg.get("stats") and not cfg.get("embedding"):
        raise UsageError("export needs --stats and/or --embedding")
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    header = _header(cfg)
    if cfg.get("stats"):
        names, deg, cnt = _read_stats(_require_file(cfg, "stats"))
        rows = "".join(f"{n}\t{d}\t{c}\n" for n, d, c in zip(names, deg.tolist(), cnt.tolist()))
        (out / "degree_updates.tsv").write_text(header + "node\tdegree\tsource_updates\n" + rows)
        hist, edges = np.histogram(cnt, bins=cfg["bins"])
        lines = [f"{lo:.6g}\t{hi:.6g}\t{h}\n" for lo, hi, h in zip(edges[:-1], edges[1:], hist.tolist())]
        (out / "update_histogram.tsv").write_text(header + "bin_low\tbin_high\tnodes\n" + "".join(lines))
        r = pearson_degree_counts(deg, cnt)
        print(f"degree/update correlation: {r!r}")
    if cfg.get("embedding"):
        emb = load_embedding(_require_file(cfg, "embedding"))
        labels = _labels_for(cfg, emb.node_names) if cfg.get("labels") else None
        lines = []
        for i, name in enumerate(emb.node_names):
            lab = ",".join(labels.label_names[x] for x in sorted(labels.labels[i])) if labels else ""
            lines.append(name + "\t" + lab + "\t" + "\t".join(repr(float(x)) for x in emb.vectors[i]) + "\n")
        (out / "projection_input.tsv").write_text(header + "".join(lines))
    print(f"wrote exports to {out}")
    return 0


COMMANDS = {"train": cmd_train, "evaluate": cmd_evaluate, "generate": cmd_generate, "export": cmd_export}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve(args)
        return COMMANDS[args.command](cfg)
    except UsageError as exc:
        print(f"manela: error: {exc}", file=sys.stderr)
        return 2
    except (GraphParseError, ValueError) as exc:
        print(f"manela: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        logger.debug("failure", exc_info=True)
        print(f"manela: failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
