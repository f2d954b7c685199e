"""Command-line entry points.

Subcommands: pretrain, adapt, sweep, export-embeddings, selftest. All
artifacts are deterministic byte-for-byte for a given config and seed.
Exit codes: 0 success, 1 selftest failure, 2 bad config or arguments,
3 I/O failure, 4 numeric failure during optimization.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import (
    build_datasets,
    build_mixup_config,
    build_model_config,
    build_train_config,
    build_uncertainty_config,
    canonical_json,
    config_run_id,
    load_config,
)
from .datasets import ssda_split
from .errors import ConfigError, NumericError
from .network import encode, load_checkpoint, save_checkpoint
from .training import (
    BASELINE_KINDS,
    adapt_uidm,
    adapt_uidm_unsupervised,
    metrics_to_csv,
    pretrain,
    records_to_csv,
    run_baseline,
)

ADAPT_METHODS = ("uidm", "uidm_unsupervised") + BASELINE_KINDS


def _parse_int_list(text: str, flag: str):
    try:
        return [int(tok) for tok in text.split(",") if tok != ""]
    except ValueError as exc:
        raise ConfigError(f"{flag} expects comma-separated integers, "
                          f"got {text!r}") from exc


def _parse_float_list(text: str, flag: str):
    try:
        return [float(tok) for tok in text.split(",") if tok != ""]
    except ValueError as exc:
        raise ConfigError(f"{flag} expects comma-separated numbers, "
                          f"got {text!r}") from exc


def _out_dir(path_str: str) -> Path:
    out = Path(path_str)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _split_for_seed(target, config, seed):
    return ssda_split(target, shots=config["split"]["shots"],
                      val_per_class=config["split"]["val_per_class"],
                      seed=seed)


def _run_method(method, model, split, train_cfg, unc_cfg, mix_cfg):
    if method == "uidm":
        return adapt_uidm(model, split, train_cfg, unc_cfg, mix_cfg)
    if method == "uidm_unsupervised":
        return adapt_uidm_unsupervised(model, split, train_cfg, unc_cfg,
                                       mix_cfg)
    if method in BASELINE_KINDS:
        return run_baseline(method, model, split, train_cfg, unc_cfg, mix_cfg)
    raise ConfigError(f"unknown method {method!r}; "
                      f"expected one of {ADAPT_METHODS}")


# -- subcommands ----------------------------------------------------------------


def cmd_pretrain(args) -> int:
    config = load_config(args.config)
    out = _out_dir(args.out)
    source, _ = build_datasets(config)
    result = pretrain(source, build_model_config(config),
                      build_train_config(config, args.seed))
    save_checkpoint(result.model, out / "checkpoint.npz")
    metrics_to_csv(result.metrics, out / "metrics.csv")
    echo = {
        "command": "pretrain",
        "seed": args.seed,
        "run_id": config_run_id(config, args.seed),
        "val_accuracy": result.val_accuracy,
        "config": config,
    }
    (out / "config.json").write_text(canonical_json(echo))
    print(f"pretrain: val accuracy {result.val_accuracy:.4f} -> {out}")
    return 0


def cmd_adapt(args) -> int:
    config = load_config(args.config)
    seeds = _parse_int_list(args.seed, "--seed")
    if not seeds:
        raise ConfigError("--seed must name at least one seed")
    out = _out_dir(args.out)
    _, target = build_datasets(config)
    model = load_checkpoint(args.checkpoint,
                            expected_config=build_model_config(config))
    unc_cfg = build_uncertainty_config(config)
    mix_cfg = build_mixup_config(config)

    final_unlabeled, final_val = {}, {}
    for seed in seeds:
        split = _split_for_seed(target, config, seed)
        result = _run_method(args.method, model, split,
                             build_train_config(config, seed), unc_cfg,
                             mix_cfg)
        metrics_to_csv(result.metrics, out / f"metrics_seed{seed}.csv")
        records_to_csv(result.round_records, out / f"records_seed{seed}.csv",
                       index_map=split.unlabeled_idx)
        final_unlabeled[str(seed)] = result.final_accuracy("unlabeled")
        final_val[str(seed)] = result.final_accuracy("val")
    unl = np.array(list(final_unlabeled.values()))
    summary = {
        "command": "adapt",
        "method": args.method,
        "seeds": seeds,
        "run_id": config_run_id(config, seeds[0]),
        "unlabeled_accuracy": {
            "per_seed": final_unlabeled,
            "median": float(np.median(unl)),
            "std": float(np.std(unl)),
        },
        "val_accuracy": {"per_seed": final_val},
        "config": config,
    }
    (out / "summary.json").write_text(canonical_json(summary))
    print(f"adapt[{args.method}]: median unlabeled accuracy "
          f"{float(np.median(unl)):.4f} over seeds {seeds} -> {out}")
    return 0


def cmd_sweep(args) -> int:
    config = load_config(args.config)
    seeds = _parse_int_list(args.seeds, "--seeds")
    if not seeds:
        raise ConfigError("--seeds must name at least one seed")
    out = _out_dir(args.out)
    _, target = build_datasets(config)
    model = load_checkpoint(args.checkpoint,
                            expected_config=build_model_config(config))
    unc_cfg = build_uncertainty_config(config)
    mix_cfg = build_mixup_config(config)

    if args.param == "snpc":
        values = _parse_int_list(args.values, "--values")
        configs = [(v, replace(unc_cfg, snpc=v), mix_cfg, str(v))
                   for v in values]
    elif args.param == "beta_mean":
        values = _parse_float_list(args.values, "--values")
        configs = []
        for m in values:
            if not 0.0 < m < 1.0:
                raise ConfigError(f"beta_mean values must lie in (0, 1), got {m}")
            # Beta(2, b) has mean 2/(2+b); solve b for the requested mean and
            # disable the floor so the mean actually moves
            mix = replace(mix_cfg, beta_a=2.0, beta_b=2.0 * (1.0 - m) / m,
                          lambda_floor_adjust=False)
            configs.append((m, unc_cfg, mix, repr(float(m))))
    else:
        raise ConfigError(f"unknown sweep param {args.param!r}; "
                          "expected 'snpc' or 'beta_mean'")

    lines = ["param,value,seed,accuracy"]
    for value, ucfg, mcfg, token in configs:
        for seed in seeds:
            split = _split_for_seed(target, config, seed)
            result = adapt_uidm(model, split,
                                build_train_config(config, seed), ucfg, mcfg)
            acc = result.final_accuracy("unlabeled")
            lines.append(f"{args.param},{token},{seed},{repr(acc)}")
            print(f"sweep {args.param}={token} seed={seed}: {acc:.4f}")
    (out / "sweep.csv").write_text("\n".join(lines) + "\n")
    echo = {"command": "sweep", "param": args.param, "seeds": seeds,
            "run_id": config_run_id(config, seeds[0]), "config": config}
    (out / "config.json").write_text(canonical_json(echo))
    return 0


def cmd_export_embeddings(args) -> int:
    config = load_config(args.config)
    out = _out_dir(args.out)
    source, target = build_datasets(config)
    model = load_checkpoint(args.checkpoint,
                            expected_config=build_model_config(config))
    h = model.config.bottleneck_dim
    lines = [",".join(["index", "domain", "label"]
                      + [f"f{i}" for i in range(h)])]
    for ds in (source, target):
        emb = encode(model, ds.features).data
        for i in range(len(ds)):
            lines.append(",".join(
                [str(i), ds.domain_tag, str(int(ds.labels[i]))]
                + [f"{v:.17g}" for v in emb[i]]))
    (out / "embeddings.csv").write_text("\n".join(lines) + "\n")
    print(f"export-embeddings: {len(source) + len(target)} rows -> {out}")
    return 0


# -- selftest -------------------------------------------------------------------


def _selftest_checks():
    from .autodiff import Tensor, matmul, softmax, tsum
    from .mixup import MixupConfig, mix_pair, sample_lambda
    from .uncertainty import UncertaintyConfig, entropy, source_like_select

    def gradient_check():
        rng = np.random.default_rng(0)
        a = Tensor(rng.normal(size=(4, 3)), requires_grad=True)
        b = Tensor(rng.normal(size=(3, 5)), requires_grad=True)
        loss = tsum(softmax(matmul(a, b)))
        loss.backward()
        for t in (a, b):
            num = np.zeros_like(t.data)
            flat, nflat = t.data.ravel(), num.ravel()
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + 1e-5
                hi = float(tsum(softmax(matmul(a, b))).data)
                flat[i] = orig - 1e-5
                lo = float(tsum(softmax(matmul(a, b))).data)
                flat[i] = orig
                nflat[i] = (hi - lo) / 2e-5
            rel = np.max(np.abs(t.grad - num)
                         / np.maximum(np.abs(t.grad) + np.abs(num), 1e-6))
            assert rel < 1e-4, f"gradient error {rel}"

    def entropy_check():
        assert abs(entropy(np.array([0.7, 0.3])) - 0.6108643020548935) < 1e-12
        assert entropy(np.eye(3)[0]) == 0.0
        assert abs(entropy(np.full(4, 0.25)) - np.log(4)) < 1e-12

    def selection_check():
        rng = np.random.default_rng(1)
        for _ in range(5):
            p = rng.dirichlet(np.ones(4), size=60)
            from .uncertainty import PoolScores
            scores = PoolScores(p, entropy(p), p.argmax(axis=1))
            sel = source_like_select(scores, snpc=6)
            for cls in np.unique(scores.predicted):
                cand = sorted(
                    (scores.entropies[i], i)
                    for i in np.flatnonzero(scores.predicted == cls))
                want = sorted(i for _, i in cand[:6])
                got = [i for i in sel.selected_idx
                       if scores.predicted[i] == cls]
                assert got == want, f"selection mismatch for class {cls}"

    def mixup_check():
        rng = np.random.default_rng(2)
        x1, x2 = rng.normal(size=(2, 16, 3))
        y1 = rng.dirichlet(np.ones(4), size=16)
        y2 = rng.dirichlet(np.ones(4), size=16)
        x, y = mix_pair(x1, y1, x2, y2, np.ones(16))
        assert np.array_equal(x, x1) and np.array_equal(y, y1)
        x, y = mix_pair(x1, y1, x2, y2, np.zeros(16))
        assert np.array_equal(x, x2) and np.array_equal(y, y2)
        lam = sample_lambda(MixupConfig(), np.random.default_rng(0), size=2000)
        assert np.all(lam >= 0.5)
        _, y = mix_pair(x1, y1, x2, y2, rng.uniform(0, 1, 16))
        assert np.max(np.abs(y.sum(axis=1) - 1.0)) < 1e-9

    def end_to_end_check():
        from .datasets import make_blobs_shift, ssda_split
        from .network import ModelConfig
        from .training import TrainConfig
        source, target = make_blobs_shift(K=3, n_per_class=30, d=2,
                                          shift_scale=1.0, spread=0.4, seed=0)
        split = ssda_split(target, shots=1, val_per_class=2, seed=0)
        pre = pretrain(source,
                       ModelConfig(input_dim=2, num_classes=3,
                                   hidden_dims=(16,), bottleneck_dim=8,
                                   dropout_rate=0.25),
                       TrainConfig(seed=0, max_epochs=20, patience=5))
        cfg = TrainConfig(seed=0, outer_rounds=1, inner_steps=10, alpha=10.0)
        result = adapt_uidm(pre.model, split, cfg,
                            UncertaintyConfig(snpc=3), MixupConfig())
        acc = result.final_accuracy("unlabeled")
        assert 0.0 <= acc <= 1.0 and np.isfinite(acc)
        assert np.array_equal(result.model.classifier_weight.data,
                              pre.model.classifier_weight.data)

    return [("gradients", gradient_check), ("entropy", entropy_check),
            ("selection", selection_check), ("mixup", mixup_check),
            ("end-to-end", end_to_end_check)]


def cmd_selftest(_args) -> int:
    failures = 0
    for name, check in _selftest_checks():
        try:
            check()
        except AssertionError as exc:
            failures += 1
            print(f"selftest {name}: FAIL ({exc})")
        else:
            print(f"selftest {name}: ok")
    if failures:
        print(f"selftest: {failures} check(s) failed")
        return 1
    print("selftest: all checks passed")
    return 0


# -- argument parsing -----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uidm",
        description="Uncertainty-guided intra-domain mixup on synthetic "
                    "domain shifts")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pretrain", help="train a source model")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("adapt", help="adapt a source checkpoint to the target")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--method", default="uidm", choices=ADAPT_METHODS)
    p.add_argument("--seed", default="0",
                   help="comma-separated adaptation seeds")
    p.set_defaults(func=cmd_adapt)

    p = sub.add_parser("sweep", help="sweep one parameter across seeds")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--param", required=True, choices=("snpc", "beta_mean"))
    p.add_argument("--values", required=True,
                   help="comma-separated parameter values")
    p.add_argument("--seeds", default="0",
                   help="comma-separated adaptation seeds")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("export-embeddings",
                       help="dump bottleneck embeddings for both domains")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_embeddings)

    p = sub.add_parser("selftest", help="run quick built-in checks")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
