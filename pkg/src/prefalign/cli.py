"""Command-line surface: plane sweeps, training, metric scoring, verification, data generation.

Every command resolves its options as flags > TOML config file > built-in
defaults, seeds all randomness from one ``--seed`` value (falling back to the
``PREFALIGN_SEED`` environment variable, then 0), and echoes the resolved
configuration into a metadata header of whatever file it writes, so outputs
are reproducible byte for byte.  Exit codes: 0 success, 1 runtime failure,
2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from typing import Dict, List, Optional, Sequence

import numpy as np

try:
    import tomllib  # py311+
except ModuleNotFoundError:  # pragma: no cover - py310 path
    import tomli as tomllib

from . import __version__, diffcore, evalmetrics, gradfield, toylm
from .diffcore import GraphError
from .losses import (
    DomainError,
    Family,
    LossParams,
    asft_align_loss,
    asft_align_plane,
    log_odds,
    sigmoid,
    LogProbPair,
)
from .toylm import ConfigError

_TOOL = "prefalign"

_FAMILY_CHOICES = [f.value for f in Family]
_PLANE_CHOICES = [Family.ASFT.value, Family.BT.value]

_DEFAULTS: Dict[str, Dict[str, object]] = {
    "field": {
        "loss": "asft",
        "beta": 0.1,
        "grid": 100,
        "lo": 0.01,
        "hi": 0.99,
        "t_lo": 0.25,
        "t_hi": 0.75,
    },
    "train": {
        "loss": "asft",
        "beta": 0.1,
        "alpha": 0.1,
        "lam": 0.1,
        "tau": 0.1,
        "aggregation": "sum",
        "steps": 200,
        "lr": 0.05,
        "batch_size": 32,
        "order": 2,
        "ref_snapshot": False,
    },
    "eval": {
        "lowercase": True,
        "smooth": 0.0,
        "sentence_bleu": False,
    },
    "verify": {
        "h": 1e-6,
        "grid": 20,
        "points": 100,
        "loss": "both",
        "beta": None,
    },
    "gendata": {
        "n": 500,
    },
}


def _load_config(path: Optional[str]) -> Dict[str, object]:
    if path is None:
        return {}
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def _resolve(args: argparse.Namespace, command: str) -> Dict[str, object]:
    """Merge flag values over the TOML config over built-in defaults."""
    cfg = _load_config(getattr(args, "config", None))
    section = cfg.get(command, {})
    if not isinstance(section, dict):
        raise ValueError(f"config section [{command}] must be a table")
    resolved: Dict[str, object] = {}
    for key, default in _DEFAULTS[command].items():
        flag = getattr(args, key, None)
        if flag is not None:
            resolved[key] = flag
        elif key in section:
            resolved[key] = section[key]
        elif key in cfg and not isinstance(cfg[key], dict):
            resolved[key] = cfg[key]
        else:
            resolved[key] = default
    seed = getattr(args, "seed", None)
    if seed is None:
        seed = section.get("seed", cfg.get("seed"))
    if seed is None:
        env = os.environ.get("PREFALIGN_SEED")
        seed = int(env) if env else 0
    resolved["seed"] = int(seed)
    return resolved


def _metadata(command: str, resolved: Dict[str, object]) -> Dict[str, object]:
    meta: Dict[str, object] = {"tool": _TOOL, "tool_version": __version__, "command": command}
    for key in sorted(resolved):
        meta[key] = resolved[key]
    return meta


def _loss_params(resolved: Dict[str, object], family: Family) -> LossParams:
    return LossParams(
        family=family,
        beta=float(resolved.get("beta", 0.1)),
        alpha=float(resolved.get("alpha", 0.1)),
        lam=float(resolved.get("lam", 0.1)),
        tau=float(resolved.get("tau", 0.1)),
        logprob_aggregation=str(resolved.get("aggregation", "sum")),
    )


# ---------------------------------------------------------------------------
# field
# ---------------------------------------------------------------------------


def cmd_field(args: argparse.Namespace) -> int:
    resolved = _resolve(args, "field")
    family = Family(resolved["loss"])
    params = LossParams(family=family, beta=float(resolved["beta"]))
    spec = gradfield.GridSpec(
        n=int(resolved["grid"]),
        lo=float(resolved["lo"]),
        hi=float(resolved["hi"]),
        family=family,
        params=params,
    )
    field = gradfield.sweep(spec, t_lo=float(resolved["t_lo"]), t_hi=float(resolved["t_hi"]))
    meta = _metadata("field", resolved)
    gradfield.write_field_csv(field, args.out, meta)
    if args.svg:
        gradfield.write_field_svg(field, args.svg)
    print(f"wrote {len(field.points)} grid points to {args.out}")
    return 0


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------


def cmd_train(args: argparse.Namespace) -> int:
    resolved = _resolve(args, "train")
    family = Family(resolved["loss"])
    params = _loss_params(resolved, family)
    dataset = toylm.load_dataset_jsonl(args.data)
    if not dataset:
        raise ValueError(f"dataset {args.data} contains no records")
    trajectory, policy = toylm.train(
        dataset,
        params,
        steps=int(resolved["steps"]),
        seed=int(resolved["seed"]),
        lr=float(resolved["lr"]),
        batch_size=int(resolved["batch_size"]),
        context_order=int(resolved["order"]),
        use_reference=bool(resolved["ref_snapshot"]),
    )
    meta = _metadata("train", resolved)
    meta["data"] = args.data
    toylm.write_trajectory_csv(trajectory, args.out, meta)
    if args.checkpoint:
        toylm.save_checkpoint(policy, args.checkpoint, metadata=meta)
    first, last = trajectory.initial, trajectory.final
    print(
        f"{family.value}: {len(trajectory.records) - 1} steps, "
        f"margin {first.margin:.6f} -> {last.margin:.6f}, wrote {args.out}"
    )
    return 0


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------


def _read_segments(path: str) -> List[str]:
    with open(path, "r", encoding="utf-8") as fh:
        return [line.rstrip("\n") for line in fh]


def _read_eval_jsonl(path: str):
    hyps, refs = [], []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            obj = json.loads(line)
            if "_meta" in obj:
                continue
            try:
                hyps.append(obj["hypothesis"])
                refs.append(obj["reference"])
            except KeyError as err:
                raise ValueError(f"{path}:{lineno}: missing field {err}") from None
    return hyps, refs


def cmd_eval(args: argparse.Namespace) -> int:
    resolved = _resolve(args, "eval")
    if args.jsonl:
        hyp_lines, ref_lines = _read_eval_jsonl(args.jsonl)
    else:
        if not (args.hyp and args.ref):
            raise ValueError("eval needs either --jsonl or both --hyp and --ref")
        hyp_lines = _read_segments(args.hyp)
        ref_lines = _read_segments(args.ref)
    lowercase = bool(resolved["lowercase"])
    hyps = [evalmetrics.tokenize(s, lowercase) for s in hyp_lines]
    refs = [evalmetrics.tokenize(s, lowercase) for s in ref_lines]
    report = evalmetrics.score_corpus(
        hyps,
        refs,
        smooth=float(resolved["smooth"]),
        sentence_level_bleu=bool(resolved["sentence_bleu"]),
    )
    payload = {
        "metadata": _metadata("eval", resolved),
        "metrics": report.to_dict(),
    }
    text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    print(
        f"bleu4={report.bleu4:.6f} rouge1={report.rouge1.f1:.6f} "
        f"rouge2={report.rouge2.f1:.6f} rougeL={report.rougeL.f1:.6f}"
        + (f" -> {args.out}" if args.out else "")
    )
    return 0


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------


def _verify_rows(resolved: Dict[str, object]) -> List[tuple]:
    h = float(resolved["h"])
    grid_n = int(resolved["grid"])
    n_points = int(resolved["points"])
    seed = int(resolved["seed"])
    which = str(resolved["loss"])
    betas = [0.1, 0.5, 1.0]
    extra_beta = resolved.get("beta")
    if extra_beta is not None and float(extra_beta) not in betas:
        betas.append(float(extra_beta))

    rows = []

    def add(name: str, err: float, tol: float) -> None:
        rows.append((name, err, tol, err <= tol))

    lo, hi = 0.05, 0.95
    axis = [lo + k * (hi - lo) / (grid_n - 1) for k in range(grid_n)]

    if which in ("bt", "both"):
        for beta in betas:
            params = LossParams(family=Family.BT, beta=beta)
            e1, e2 = gradfield.grid_fd_errors(Family.BT, params, n=grid_n, lo=lo, hi=hi, h=h)
            add(f"bt partials vs finite differences (beta={beta:g})", max(e1, e2), 1e-5)
    if which in ("asft", "both"):
        params = LossParams(family=Family.ASFT)
        e1, e2 = gradfield.grid_fd_errors(Family.ASFT, params, n=grid_n, lo=lo, hi=hi, h=h)
        add("asft partials vs finite differences", max(e1, e2), 1e-5)
        exact_err = 0.0
        for x1 in axis:
            for x2 in axis:
                d1, d2 = gradfield.asft_partials(x1, x2)
                exact_err = max(exact_err, abs(d1 - (-1.0 / x1)), abs(d2 - 1.0 / (1.0 - x2)))
        add("asft partials match exact closed forms", exact_err, 0.0)

    rng = np.random.default_rng(seed)
    ps = np.concatenate(
        [[1e-12, 1.0 - 1e-12], rng.uniform(1e-12, 1.0 - 1e-12, size=9998)]
    )
    score_err = max(abs(sigmoid(log_odds(math.log(p))) - p) for p in ps)
    add("score identity sigmoid(log_odds(p)) = p", score_err, 1e-10)

    eq_axis = [1e-6 + k * (1.0 - 2e-6) / (grid_n - 1) for k in range(grid_n)]
    eq_err = 0.0
    for x1 in eq_axis:
        for x2 in eq_axis:
            pair_form = asft_align_loss(LogProbPair(math.log(x1), math.log(x2)))
            eq_err = max(eq_err, abs(pair_form - asft_align_plane(x1, x2)))
    add("alignment loss equals plane form -log(x1)-log(1-x2)", eq_err, 1e-9)

    stable_err = 0.0
    for p in eq_axis:
        stable_err = max(stable_err, abs(log_odds(math.log(p)) - math.log(p / (1.0 - p))))
    add("stable log-odds matches naive form", stable_err, 1e-9)
    finite = math.isfinite(log_odds(-700.0))
    add("log-odds finite at logp = -700", 0.0 if finite else math.inf, 0.0)

    ratio_bt = 0.0
    ratio_asft = 0.0
    for x1 in axis:
        for x2 in axis:
            for beta in betas:
                d1, d2 = gradfield.bt_partials(x1, x2, beta)
                ratio_bt = max(ratio_bt, abs(abs(d2) / abs(d1) - x1 / x2))
            a1, a2 = gradfield.asft_partials(x1, x2)
            ratio_asft = max(ratio_asft, abs(abs(a1) / abs(a2) - (1.0 - x2) / x1))
    add("bt gradient ratio |d2|/|d1| = x1/x2", ratio_bt, 1e-12)
    add("asft gradient ratio |d1|/|d2| = (1-x2)/x1", ratio_asft, 1e-12)

    sign_violations = 0
    sign_spec_asft = gradfield.GridSpec(100, 0.01, 0.99, Family.ASFT, LossParams(family=Family.ASFT))
    sign_spec_bt = gradfield.GridSpec(100, 0.01, 0.99, Family.BT, LossParams(family=Family.BT))
    for spec in (sign_spec_asft, sign_spec_bt):
        for point in gradfield.sweep(spec).points:
            if not (point.d1 < 0.0 < point.d2):
                sign_violations += 1
    add("sign field: d1 < 0 < d2 at all grid points", float(sign_violations), 0.0)

    for family in (Family.ASFT, Family.DPO, Family.ORPO, Family.IPO):
        params = LossParams(family=family)
        graph = diffcore.loss_graph(params)
        worst = 0.0
        for _ in range(n_points):
            inputs = {name: math.log(rng.uniform(0.02, 0.98)) for name in graph.inputs}
            worst = max(worst, diffcore.grad_check(graph, inputs, h=h).max_rel_err)
        add(f"autodiff vs finite differences ({family.value})", worst, 1e-5)

    return rows


def cmd_verify(args: argparse.Namespace) -> int:
    resolved = _resolve(args, "verify")
    meta = _metadata("verify", resolved)
    print("# " + " ".join(f"{k}={v}" for k, v in meta.items()))
    rows = _verify_rows(resolved)
    name_width = max(len(name) for name, *_ in rows)
    print(f"{'check':<{name_width}}  {'max error':>12}  {'threshold':>10}  status")
    ok = True
    for name, err, tol, passed in rows:
        ok = ok and passed
        print(f"{name:<{name_width}}  {err:>12.3e}  {tol:>10.0e}  {'PASS' if passed else 'FAIL'}")
    print(f"verify: {'all checks passed' if ok else 'CHECKS FAILED'}")
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# gendata
# ---------------------------------------------------------------------------


def cmd_gendata(args: argparse.Namespace) -> int:
    resolved = _resolve(args, "gendata")
    triples = toylm.generate_dataset(int(resolved["n"]), seed=int(resolved["seed"]))
    toylm.write_dataset_jsonl(triples, args.out, metadata=_metadata("gendata", resolved))
    print(f"wrote {len(triples)} preference triples to {args.out}")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=_TOOL,
        description="Desk-scale laboratory for reference-free preference-alignment losses.",
    )
    parser.add_argument("--version", action="version", version=f"{_TOOL} {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="optional TOML config file (flags take precedence)")
        p.add_argument("--seed", type=int, help="run seed (default: $PREFALIGN_SEED or 0)")

    p = sub.add_parser("field", help="sweep a plane loss into a CSV (and optional SVG) field")
    common(p)
    p.add_argument("--loss", choices=_PLANE_CHOICES, help="plane loss family")
    p.add_argument("--beta", type=float, help="bt comparison temperature")
    p.add_argument("--grid", type=int, help="points per axis")
    p.add_argument("--lo", type=float, help="axis lower bound, in (0, 1)")
    p.add_argument("--hi", type=float, help="axis upper bound, in (0, 1)")
    p.add_argument("--t-lo", dest="t_lo", type=float, help="case threshold: small side")
    p.add_argument("--t-hi", dest="t_hi", type=float, help="case threshold: large side")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--svg", help="optional SVG rendering path")
    p.set_defaults(func=cmd_field)

    p = sub.add_parser("train", help="train the toy policy on a JSONL preference dataset")
    common(p)
    p.add_argument("--data", required=True, help="JSONL dataset path")
    p.add_argument("--loss", choices=_FAMILY_CHOICES, help="loss family")
    p.add_argument("--beta", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--lam", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--aggregation", choices=["sum", "mean"], help="token logprob aggregation")
    p.add_argument("--steps", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--order", type=int, help="context order of the tabular policy")
    p.add_argument(
        "--ref-snapshot",
        dest="ref_snapshot",
        action="store_const",
        const=True,
        help="snapshot the initial policy as the frozen reference",
    )
    p.add_argument("--out", required=True, help="trajectory CSV path")
    p.add_argument("--checkpoint", help="optional policy checkpoint JSON path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score hypothesis/reference text with BLEU-4 and ROUGE")
    common(p)
    p.add_argument("--hyp", help="hypothesis text file, one segment per line")
    p.add_argument("--ref", help="reference text file, one segment per line")
    p.add_argument("--jsonl", help="JSONL with 'hypothesis'/'reference' fields per line")
    p.add_argument("--out", help="metric report JSON path (default: stdout summary only)")
    p.add_argument(
        "--no-lowercase", dest="lowercase", action="store_const", const=False,
        help="keep case when tokenizing",
    )
    p.add_argument("--smooth", type=float, help="epsilon smoothing for zero BLEU counts")
    p.add_argument(
        "--sentence-bleu", dest="sentence_bleu", action="store_const", const=True,
        help="average per-segment BLEU instead of corpus-level counts",
    )
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("verify", help="run the closed-form / finite-difference oracle suite")
    common(p)
    p.add_argument("--h", type=float, help="finite-difference step")
    p.add_argument("--grid", type=int, help="verification grid resolution")
    p.add_argument("--points", type=int, help="seeded points for autodiff checks")
    p.add_argument("--loss", choices=["asft", "bt", "both"], help="partials sweep selection")
    p.add_argument("--beta", type=float, help="extra bt beta to include in the sweep")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("gendata", help="generate a seeded synthetic preference dataset")
    common(p)
    p.add_argument("--n", type=int, help="number of preference triples")
    p.add_argument("--out", required=True, help="output JSONL path")
    p.set_defaults(func=cmd_gendata)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (DomainError, GraphError) as err:
        print(f"{_TOOL}: runtime error: {err}", file=sys.stderr)
        return 1
    except (ConfigError, FileNotFoundError, IsADirectoryError, ValueError) as err:
        print(f"{_TOOL}: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"{_TOOL}: i/o error: {err}", file=sys.stderr)
        return 1


def run() -> None:  # console entry point
    sys.exit(main())
