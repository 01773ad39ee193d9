"""Command-line entrypoint.

Subcommands: synth, ingest, pretrain, probe, interpret, selftest.  Every
command takes --config (JSON), --seed, and --out; run directories are
self-describing (resolved config + logs + outputs).  Exit status is 0 iff
the command completed without an error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import ConfigError, load_config, resolve_config, save_resolved

logger = logging.getLogger("protomm")

_COMPOSITION_ALIASES = {
    "P": "single_P", "A": "single_A", "P+A": "concat_PA",
    "single_P": "single_P", "single_A": "single_A", "concat_PA": "concat_PA",
}


def _load_experiment_config(args):
    cfg = load_config(args.config) if args.config else resolve_config()
    if getattr(args, "seed", None) is not None:
        cfg.values["training"]["seed"] = args.seed
        cfg.values["data"]["synthetic"]["seed"] = args.seed
        cfg.values["interpret"]["seed"] = args.seed
        cfg.origins["training.seed"] = "user"
    return cfg


def _train_config(cfg):
    from .losses import LossConfig
    from .prototypes import AssignmentConfig
    from .train import TrainConfig

    t, l, p, e = cfg["training"], cfg["loss"], cfg["prototypes"], cfg["encoder"]
    return TrainConfig(
        learning_rate=t["learning_rate"],
        weight_decay=t["weight_decay"],
        batch_size=t["batch_size"],
        max_epochs=t["max_epochs"],
        wall_clock_budget_hours=t["wall_clock_budget_hours"],
        beta1=t["beta1"],
        beta2=t["beta2"],
        adam_eps=t["adam_eps"],
        seed=t["seed"],
        num_views=cfg["augmentation"]["num_views"],
        n_prototypes=p["count"],
        freeze_prototype_epochs=t["freeze_prototype_epochs"],
        encoder={
            "kernel_size": e["kernel_size"],
            "stride": e["stride"],
            "embed_dim": e["embed_dim"],
            "block_layout": tuple(e["block_layout"]),
            "base_width": e["base_width"],
            "dtype": e["dtype"],
        },
        loss=LossConfig(
            objective=l["objective"],
            alpha=l["alpha"],
            nt_xent_temperature=l["nt_xent_temperature"],
            clip_temperature_init=l["clip_temperature_init"],
        ),
        assignment=AssignmentConfig(
            temperature=p["temperature"],
            sinkhorn_epsilon=p["sinkhorn_epsilon"],
            sinkhorn_iters=p["sinkhorn_iters"],
        ),
    )


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_synth(args) -> int:
    from .data import SyntheticGenConfig, generate_synthetic, save_manifest

    cfg = _load_experiment_config(args)
    gen = SyntheticGenConfig(**cfg["data"]["synthetic"])
    manifest = generate_synthetic(gen)
    out = Path(args.out)
    save_manifest(manifest, out)
    save_resolved(cfg, out)
    logger.info("wrote %d samples to %s", len(manifest.samples), out)
    return 0


def cmd_ingest(args) -> int:
    from .data import save_manifest
    from .datasets import load_dalia, load_wesad

    cfg = _load_experiment_config(args)
    root = args.data or cfg["data"]["root"]
    if not root:
        logger.error("no data root: pass --data or set the data root env var")
        return 1
    dataset, task = cfg["data"]["dataset"], cfg["data"]["task"]
    if dataset == "wesad":
        manifest = load_wesad(root, task)
    elif dataset == "dalia":
        manifest = load_dalia(root, task)
    else:
        logger.error("ingest requires data.dataset = wesad or dalia, got %r", dataset)
        return 1
    if not manifest.samples:
        logger.error("no samples ingested from %s", root)
        return 1
    out = Path(args.out)
    save_manifest(manifest, out)
    save_resolved(cfg, out)
    logger.info("ingested %d samples from %s", len(manifest.samples), root)
    return 0


def cmd_pretrain(args) -> int:
    from .data import load_manifest
    from .train import pretrain, select_best, split_subjects

    cfg = _load_experiment_config(args)
    manifest = load_manifest(args.data)
    tr, va = split_subjects(manifest, cfg["training"]["val_fraction"], cfg["training"]["seed"])
    out = Path(args.out)
    save_resolved(cfg, out)
    records, _ = pretrain(tr, va, _train_config(cfg), out_dir=out)
    best = select_best(records)
    with open(out / "best.json", "w", encoding="utf-8") as f:
        json.dump(
            {"epoch": best.epoch, "val_loss": best.val_loss, "archive": best.archive_path}, f
        )
    logger.info("best checkpoint: epoch %d (val %.5f)", best.epoch, best.val_loss)
    return 0


def cmd_probe(args) -> int:
    from .data import load_manifest
    from .evaluation import ProbeConfig, extract_embeddings, train_linear_probe
    from .models import load_checkpoint

    cfg = _load_experiment_config(args)
    composition = _COMPOSITION_ALIASES.get(args.composition or cfg["evaluation"]["composition"])
    if composition is None:
        logger.error("unknown composition %r", args.composition)
        return 1
    model = load_checkpoint(args.checkpoint)
    manifest = load_manifest(args.data)
    task_type = "regression" if manifest.task == "hr_regression" else "classification"
    emb = extract_embeddings(model, manifest, composition)
    probe_cfg = ProbeConfig(
        composition=composition,
        task_type=task_type,
        folds=cfg["evaluation"]["folds"],
        ridge_lambda=cfg["evaluation"]["ridge_lambda"],
        logistic_lambda=cfg["evaluation"]["logistic_lambda"],
        max_iter=cfg["evaluation"]["max_iter"],
    )
    _, report = train_linear_probe(emb, probe_cfg)
    out = {
        "task": manifest.task,
        "composition": composition,
        "skipped_samples": emb.skipped,
        **report.to_dict(),
    }
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    with open(args.out, "w", encoding="utf-8") as f:
        json.dump(out, f, indent=1)
    logger.info("probe metrics: %s", report.metrics)
    return 0


def cmd_interpret(args) -> int:
    from .data import load_manifest
    from .evaluation import extract_embeddings
    from .interpret import run_interpretation
    from .models import load_checkpoint

    cfg = _load_experiment_config(args)
    model = load_checkpoint(args.checkpoint)
    if model.bank is None:
        logger.error("checkpoint has no prototype bank (objective %r)", model.objective)
        return 1
    manifest = load_manifest(args.data)
    per_modality = {}
    for mod in model.modalities:
        comp = "single_P" if mod.value == "PPG" else "single_A"
        emb = extract_embeddings(model, manifest, comp)
        per_modality[mod.value] = (emb.X, emb.labels)
    k = args.k if args.k is not None else cfg["interpret"]["k"]
    top_k = args.topk if args.topk is not None else cfg["interpret"]["top_k"]
    run_interpretation(model.bank, per_modality, args.out, k=k, top_k=top_k,
                       seed=cfg["interpret"]["seed"])
    save_resolved(cfg, args.out)
    logger.info("interpretation artifacts written to %s", args.out)
    return 0


def cmd_selftest(args) -> int:
    from .selftest import run_selftest

    return run_selftest(data_root=args.data)


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="protomm",
        description="Prototype-based multimodal self-supervised learning for biosignals.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_required=True):
        p.add_argument("--config", help="JSON experiment config")
        p.add_argument("--seed", type=int, help="override all seeds")
        if out_required:
            p.add_argument("--out", required=True, help="output path")

    p = sub.add_parser("synth", help="generate a synthetic manifest")
    common(p)
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("ingest", help="ingest a public dataset into a manifest")
    common(p)
    p.add_argument("--data", help="dataset root directory")
    p.set_defaults(fn=cmd_ingest)

    p = sub.add_parser("pretrain", help="run self-supervised pre-training")
    common(p)
    p.add_argument("--data", required=True, help="manifest directory")
    p.set_defaults(fn=cmd_pretrain)

    p = sub.add_parser("probe", help="linear-probe a frozen checkpoint")
    common(p)
    p.add_argument("--data", required=True, help="manifest directory")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--composition", choices=sorted(_COMPOSITION_ALIASES), default=None)
    p.set_defaults(fn=cmd_probe)

    p = sub.add_parser("interpret", help="prototype interpretability artifacts")
    common(p)
    p.add_argument("--data", required=True, help="manifest directory")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--topk", type=int, default=None)
    p.set_defaults(fn=cmd_interpret)

    p = sub.add_parser("selftest", help="run the acceptance checks")
    common(p, out_required=False)
    p.add_argument("--data", default=None, help="public-data root for the ingestion checks")
    p.set_defaults(fn=cmd_selftest)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as e:
        logger.error("invalid config — %s", e)
        return 2
    except FileNotFoundError as e:
        logger.error("missing input path: %s", e)
        return 1
    except (ValueError, RuntimeError) as e:
        logger.error("%s", e)
        return 1


if __name__ == "__main__":
    sys.exit(main())
