"""Command-line entry point for reproducible membership-inference audits.

Subcommands: fit-pca, attack, scenario, simulate, report. Every successful
run writes a JSON manifest (inputs by digest, fully resolved config, seed,
tool version) sufficient to re-execute it bit-identically.

Exit codes: 0 success, 1 data/runtime error, 2 usage error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import secrets
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .attacks import (
    DEFAULT_DELTA,
    EpsilonHeuristic,
    KdeConfig,
    McConfig,
    kde_score,
    run_mc_attack,
    run_reconstruction_attack,
)
from .core_data import (
    ReconstructionBatch,
    RecordSet,
    SampleMatrix,
    ScoreVector,
    Origin,
    read_matrix,
    read_scores,
    write_matrix,
    write_scores,
)
from .distances import DEFAULT_MEM_BUDGET, DistanceSpec
from .errors import AuditError, ConfigError, ImbalanceError
from .features import (
    ChistParams,
    HogParams,
    load_pca_model,
    pca_fit,
    save_pca_model,
)
from .scenarios import ScenarioConfig, set_mi, single_mi
from .synth import (
    BiasedReconstructor,
    MemorizingGenerator,
    default_population,
    generate,
    reconstruct,
)


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _write_manifest(out_path: Path, command: str, config: dict, inputs: dict) -> None:
    manifest = {
        "tool": "miaudit",
        "version": __version__,
        "command": command,
        "config": config,
        "inputs": {name: _sha256(Path(p)) for name, p in inputs.items() if p},
    }
    Path(str(out_path) + ".manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))


def _resolve_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    return secrets.randbits(63)


def _load_membership(path: str) -> tuple[list[str], list[str]]:
    payload = json.loads(Path(path).read_text())
    return [str(i) for i in payload["train_ids"]], [str(i) for i in payload["test_ids"]]


def _parse_heuristic(text: str) -> EpsilonHeuristic:
    if text == "median":
        return EpsilonHeuristic("median")
    if text.startswith("percentile:"):
        return EpsilonHeuristic("percentile", p=float(text.split(":", 1)[1]))
    raise ConfigError(f"unknown heuristic {text!r}; use median or percentile:<p>")


def _distance_spec(args) -> DistanceSpec:
    if args.distance == "raw":
        return DistanceSpec("raw")
    if args.distance == "pca":
        if not args.pca_model:
            raise ConfigError("--distance pca requires --pca-model")
        return DistanceSpec("pca", pca_model=load_pca_model(args.pca_model))
    if args.distance == "hog":
        side = args.image_side
        return DistanceSpec(
            "hog",
            hog_params=HogParams(image_shape=(side, side), cell_size=args.cell_size),
        )
    return DistanceSpec(
        "chist",
        chist_params=ChistParams(
            bins_per_channel=args.bins, channels=args.channels
        ),
    )


def _record_sets(args) -> tuple[RecordSet, RecordSet]:
    train_ids, test_ids = _load_membership(args.membership)
    train = RecordSet(train_ids, read_matrix(args.train), Origin.CLAIMED_TRAIN)
    test = RecordSet(test_ids, read_matrix(args.test), Origin.CLAIMED_TEST)
    return train, test


def cmd_fit_pca(args) -> int:
    reference = read_matrix(args.reference)
    model = pca_fit(reference, args.k, whiten=args.whiten)
    save_pca_model(model, args.out)
    _write_manifest(
        Path(args.out),
        "fit-pca",
        {"k": args.k, "whiten": args.whiten},
        {"reference": args.reference},
    )
    return 0


def cmd_attack(args) -> int:
    seed = _resolve_seed(args)
    inputs = {"membership": getattr(args, "membership", None)}
    if args.kind == "score-file":
        scores = read_scores(args.scores_in, attack_name="score-file")
        if args.membership:
            train_ids, test_ids = _load_membership(args.membership)
            if set(scores.ids) != set(train_ids) | set(test_ids):
                raise ImbalanceError("score file does not cover the audit records")
        inputs["scores_in"] = args.scores_in
    elif args.kind in ("mc-eps", "mc-d"):
        train, test = _record_sets(args)
        samples = SampleMatrix(read_matrix(args.samples))
        n = args.n_samples or len(samples)
        config = McConfig(
            distance=_distance_spec(args),
            heuristic=_parse_heuristic(args.heuristic),
            n_samples=n,
            delta=args.delta,
            variant=args.kind,
            mem_budget=args.mem_budget,
            threads=args.threads,
        )
        scores = run_mc_attack(train, test, samples, config)
        inputs.update(train=args.train, test=args.test, samples=args.samples)
    elif args.kind == "kde":
        train, test = _record_sets(args)
        samples = SampleMatrix(read_matrix(args.samples))
        spec = _distance_spec(args)
        records_t = spec.transform(np.vstack([train.data, test.data]))
        samples_t = spec.transform(samples.data)
        config = KdeConfig(
            bandwidth=args.bandwidth,
            dimension=records_t.shape[1],
            textbook=args.kde_textbook,
        )
        ids = list(train.ids) + list(test.ids)
        entries = tuple(
            (rid, kde_score(row, samples_t, config))
            for rid, row in zip(ids, records_t)
        )
        scores = ScoreVector(
            entries,
            attack_name="kde",
            config_digest=json.dumps(
                {
                    "attack": "kde",
                    "bandwidth": config.bandwidth,
                    "dimension": config.dimension,
                    "textbook": config.textbook,
                    "distance": spec.describe(),
                },
                sort_keys=True,
            ),
        )
        inputs.update(train=args.train, test=args.test, samples=args.samples)
    else:  # rec
        train, test = _record_sets(args)
        combined = RecordSet(
            tuple(train.ids) + tuple(test.ids),
            np.vstack([train.data, test.data]),
        )
        rec_dir = Path(args.reconstructions_dir)

        def oracle(rid: str, _x, _n) -> ReconstructionBatch:
            return ReconstructionBatch(rid, read_matrix(rec_dir / f"{rid}.bin"))

        scores = run_reconstruction_attack(combined, oracle, args.n_reconstructions)
        inputs.update(train=args.train, test=args.test)

    write_scores(scores, args.out)
    _write_manifest(
        Path(args.out),
        f"attack {args.kind}",
        {
            "seed": seed,
            "attack_name": scores.attack_name,
            "config_digest": scores.config_digest,
        },
        inputs,
    )
    return 0


def cmd_scenario(args) -> int:
    seed = _resolve_seed(args)
    scores = read_scores(args.scores)
    train_ids, test_ids = _load_membership(args.membership)
    m = args.M or len(train_ids)
    config = ScenarioConfig(M=m, trials=args.trials, seed=seed)

    singles, sets, per_trial = [], [], []
    for t in range(config.trials):
        tseed = int(np.random.SeedSequence([seed, t]).generate_state(1)[0])
        single = single_mi(scores, train_ids, m, seed=tseed)
        decision = set_mi(scores, train_ids, test_ids, "a", seed=tseed)
        singles.append(single.single_accuracy)
        sets.append(1.0 if decision.set_correct else 0.0)
        per_trial.append(
            {
                "trial_seed": tseed,
                "single_accuracy": single.single_accuracy,
                "set_correct": decision.set_correct,
                "chosen_ids": list(single.chosen_ids),
            }
        )
    singles_arr, sets_arr = np.array(singles), np.array(sets)
    ddof = 1 if len(singles) > 1 else 0

    # the score CSV carries no configuration, but the attack command leaves a
    # manifest sidecar next to it; recover the attack metadata from there
    attack_name, digest = scores.attack_name, scores.config_digest
    sidecar = Path(str(args.scores) + ".manifest.json")
    if sidecar.exists():
        try:
            sidecar_config = json.loads(sidecar.read_text()).get("config", {})
            attack_name = sidecar_config.get("attack_name", attack_name)
            digest = sidecar_config.get("config_digest", digest)
        except (json.JSONDecodeError, OSError):
            pass
    attack_meta: dict = {}
    try:
        attack_meta = json.loads(digest) if digest else {}
    except json.JSONDecodeError:
        attack_meta = {"config_digest": digest}
    if attack_name and "attack" not in attack_meta:
        attack_meta["attack"] = attack_name
    report = {
        "attack": attack_meta.get("attack", attack_name),
        "distance": attack_meta.get("distance"),
        "heuristic": attack_meta.get("heuristic"),
        "resolved_epsilon": attack_meta.get("resolved_epsilon"),
        "n_samples": attack_meta.get("n_samples"),
        "M": m,
        "trials": config.trials,
        "seed": seed,
        "single_mean": float(singles_arr.mean()),
        "single_std": float(singles_arr.std(ddof=ddof)),
        "set_mean": float(sets_arr.mean()),
        "set_std": float(sets_arr.std(ddof=ddof)),
        "per_trial": per_trial,
    }
    Path(args.out).write_text(json.dumps(report, indent=2, sort_keys=True))
    _write_manifest(
        Path(args.out),
        "scenario",
        {"M": m, "trials": args.trials, "seed": seed},
        {"scores": args.scores, "membership": args.membership},
    )
    return 0


def cmd_simulate(args) -> int:
    seed = _resolve_seed(args)
    rng = np.random.default_rng([seed, 0])
    if args.mode == "samples":
        population = default_population(
            dim=args.dim, components=args.components, seed=seed
        )
        pool = population.draw(args.pool_size, rng)
        if args.M > args.pool_size:
            raise ConfigError("M cannot exceed the pool size")
        train_idx = rng.choice(args.pool_size, size=args.M, replace=False)
        train = pool[train_idx]
        test = population.draw(args.M, rng)
        gen = MemorizingGenerator(
            train_pool=pool,
            memorization_rate=args.rho,
            noise_scale=args.sigma,
            population=population,
            seed=seed,
        )
        samples = generate(gen, args.n)
        write_matrix(train, args.train_out, dtype=args.dtype)
        write_matrix(test, args.test_out, dtype=args.dtype)
        write_matrix(samples.data, args.samples_out, dtype=args.dtype)
        membership = {
            "train_ids": [f"train-{i:05d}" for i in range(args.M)],
            "test_ids": [f"test-{i:05d}" for i in range(args.M)],
        }
        Path(args.membership_out).write_text(json.dumps(membership, indent=2))
        _write_manifest(
            Path(args.samples_out),
            "simulate samples",
            {
                "seed": seed,
                "dim": args.dim,
                "components": args.components,
                "pool_size": args.pool_size,
                "rho": args.rho,
                "sigma": args.sigma,
                "n": args.n,
                "M": args.M,
            },
            {},
        )
        return 0

    # reconstructions mode
    train, test = _record_sets(args)
    oracle = BiasedReconstructor(
        member_ids=frozenset(train.ids),
        residual_scale_member=args.member_scale,
        residual_scale_nonmember=args.nonmember_scale,
        seed=seed,
    )
    out_dir = Path(args.rec_out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for rid, row in zip(
        tuple(train.ids) + tuple(test.ids), np.vstack([train.data, test.data])
    ):
        batch = reconstruct(oracle, rid, row, args.n)
        write_matrix(batch.reconstructions, out_dir / f"{rid}.bin", dtype=args.dtype)
    _write_manifest(
        out_dir / "batches",
        "simulate reconstructions",
        {
            "seed": seed,
            "n": args.n,
            "member_scale": args.member_scale,
            "nonmember_scale": args.nonmember_scale,
        },
        {"train": args.train, "test": args.test, "membership": args.membership},
    )
    return 0


def cmd_report_merge(args) -> int:
    reports = [json.loads(Path(p).read_text()) for p in args.reports]
    singles = [t["single_accuracy"] for r in reports for t in r["per_trial"]]
    sets = [1.0 if t["set_correct"] else 0.0 for r in reports for t in r["per_trial"]]
    ddof = 1 if len(singles) > 1 else 0
    merged = {
        "reports": reports,
        "pooled": {
            "trials": len(singles),
            "single_mean": float(np.mean(singles)),
            "single_std": float(np.std(singles, ddof=ddof)),
            "set_mean": float(np.mean(sets)),
            "set_std": float(np.std(sets, ddof=ddof)),
        },
    }
    Path(args.out).write_text(json.dumps(merged, indent=2, sort_keys=True))
    _write_manifest(
        Path(args.out),
        "report merge",
        {"n_reports": len(reports)},
        {f"report_{i}": p for i, p in enumerate(args.reports)},
    )
    return 0


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument(
        "--threads",
        type=int,
        default=int(os.environ["MIAUDIT_THREADS"]) if os.environ.get("MIAUDIT_THREADS") else None,
    )
    parser.add_argument("--mem-budget", type=int, default=DEFAULT_MEM_BUDGET)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="miaudit")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit-pca", help="fit a PCA distance model on a reference set")
    p.add_argument("--reference", required=True)
    p.add_argument("--k", type=int, default=40)
    p.add_argument("--whiten", action="store_true")
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_fit_pca)

    p = sub.add_parser("attack", help="score audit records with an attack")
    p.add_argument("kind", choices=["mc-eps", "mc-d", "kde", "rec", "score-file"])
    p.add_argument("--train")
    p.add_argument("--test")
    p.add_argument("--membership")
    p.add_argument("--samples")
    p.add_argument("--scores-in")
    p.add_argument("--reconstructions-dir")
    p.add_argument("--n-reconstructions", type=int, default=1)
    p.add_argument("--distance", choices=["raw", "pca", "hog", "chist"], default="raw")
    p.add_argument("--pca-model")
    p.add_argument("--image-side", type=int, default=28)
    p.add_argument("--cell-size", type=int, default=7)
    p.add_argument("--bins", type=int, default=16)
    p.add_argument("--channels", type=int, default=3)
    p.add_argument("--heuristic", default="median")
    p.add_argument("--delta", type=float, default=DEFAULT_DELTA)
    p.add_argument("--bandwidth", type=float, default=None)
    p.add_argument("--kde-textbook", action="store_true")
    p.add_argument("--n-samples", type=int, default=None)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("scenario", help="run single and set MI on a score file")
    p.add_argument("--scores", required=True)
    p.add_argument("--membership", required=True)
    p.add_argument("--M", type=int, default=None)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("simulate", help="emit synthetic audit data")
    p.add_argument("mode", choices=["samples", "reconstructions"])
    p.add_argument("--dim", type=int, default=40)
    p.add_argument("--components", type=int, default=10)
    p.add_argument("--pool-size", type=int, default=1000)
    p.add_argument("--rho", type=float, default=0.5)
    p.add_argument("--sigma", type=float, default=0.05)
    p.add_argument("--n", type=int, default=10**4)
    p.add_argument("--M", type=int, default=100)
    p.add_argument("--dtype", choices=["f32", "f64"], default="f64")
    p.add_argument("--train-out", default="train.bin")
    p.add_argument("--test-out", default="test.bin")
    p.add_argument("--samples-out", default="samples.bin")
    p.add_argument("--membership-out", default="membership.json")
    p.add_argument("--train")
    p.add_argument("--test")
    p.add_argument("--membership")
    p.add_argument("--member-scale", type=float, default=0.5)
    p.add_argument("--nonmember-scale", type=float, default=1.0)
    p.add_argument("--rec-out", default="reconstructions")
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("report", help="report utilities")
    rsub = p.add_subparsers(dest="report_command", required=True)
    pm = rsub.add_parser("merge", help="merge scenario reports")
    pm.add_argument("--out", required=True)
    pm.add_argument("reports", nargs="+")
    _add_common(pm)
    pm.set_defaults(func=cmd_report_merge)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except AuditError as exc:
        print(f"miaudit: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"miaudit: i/o error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
