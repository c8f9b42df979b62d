"""Command-line interface.

Subcommands: toy-validate, gen-instance, ground-truth, sweep, spectra,
decode-series.  Exit status: 0 on success, 1 on validation failure, 2 on
configuration errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from parityanneal import harness
from parityanneal.ising import ProblemInstance, brute_force_ground_state, generate_instance

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_CONFIG = 2


def _ensure_out_dir(path):
    os.makedirs(path, exist_ok=True)
    return path


def _load_config(args):
    if not args.config:
        raise harness.ConfigError("--config is required")
    if not os.path.exists(args.config):
        raise harness.ConfigError(f"config file not found: {args.config}")
    with open(args.config) as fh:
        cfg = harness.ExperimentConfig.from_json(fh.read())
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def cmd_toy_validate(args) -> int:
    report = harness.toy_validate(
        seed=args.seed if args.seed is not None else 0,
        steps=args.steps,
        rf_steps=args.rf_steps,
        k_param=args.k,
    )
    print(f"energies: {'PASS' if report.energies_ok else 'FAIL'} (8 exact values)")
    for name, measured, threshold, ok in report.checks:
        print(
            f"{name}: {'PASS' if ok else 'FAIL'} "
            f"(measured {measured:.5f}, threshold {threshold})"
        )
    if args.out_dir:
        out = _ensure_out_dir(args.out_dir)
        with open(os.path.join(out, "toy_report.json"), "w") as fh:
            fh.write(report.to_json())
        if not args.no_figures:
            from parityanneal import plots

            plots.toy_figure(report, os.path.join(out, "toy_distributions.png"))
    return EXIT_OK if report.passed else EXIT_VALIDATION


def cmd_gen_instance(args) -> int:
    inst = generate_instance(args.size, args.seed or 0, args.half_width)
    text = inst.to_json()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        print(f"wrote {args.out}")
    else:
        print(text)
    return EXIT_OK


def cmd_ground_truth(args) -> int:
    with open(args.instance) as fh:
        inst = ProblemInstance.from_json(fh.read())
    cert = brute_force_ground_state(inst)
    doc = {
        "state": [int(v) for v in cert.state],
        "energy": cert.energy,
        "degeneracy": cert.degeneracy,
    }
    text = json.dumps(doc)
    if args.out_dir:
        out = _ensure_out_dir(args.out_dir)
        with open(os.path.join(out, "ground_truth.json"), "w") as fh:
            fh.write(text)
    print(text)
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    cells = harness.run_sweep(cfg, threads=args.threads)
    out = _ensure_out_dir(args.out_dir or ".")
    csv_path = os.path.join(out, "sweep.csv")
    harness.write_sweep_csv(cells, csv_path)
    print(f"wrote {csv_path}")
    if not args.no_figures:
        from parityanneal import plots

        fig_path = plots.sweep_figure(cells, os.path.join(out, "sweep.png"))
        print(f"wrote {fig_path}")
    return EXIT_OK


def cmd_spectra(args) -> int:
    cfg = _load_config(args)
    result = harness.run_spectra(cfg)
    out = _ensure_out_dir(args.out_dir or ".")
    paths = harness.write_spectra_csv(result, out)
    series_path = os.path.join(out, "series.csv")
    harness.write_series_csv(result, cfg.instance, series_path)
    agree_path = os.path.join(out, "agreement.csv")
    np.savetxt(agree_path, result.agreement, delimiter=",")
    meta = {
        "beta": result.beta,
        "gamma": result.gamma,
        "class_totals": result.class_totals,
        "mean_iters": result.mean_iters,
        "samples": len(result.series),
    }
    with open(os.path.join(out, "spectra_meta.json"), "w") as fh:
        json.dump(meta, fh)
    for p in [*paths.values(), series_path, agree_path]:
        print(f"wrote {p}")
    if not args.no_figures:
        from parityanneal import plots

        print(f"wrote {plots.spectra_figure(result, os.path.join(out, 'spectra.png'))}")
        print(
            f"wrote {plots.agreement_figure(result.agreement, os.path.join(out, 'agreement.png'))}"
        )
    return EXIT_OK


def cmd_decode_series(args) -> int:
    inst = None
    if args.instance:
        with open(args.instance) as fh:
            inst = ProblemInstance.from_json(fh.read())
    out = _ensure_out_dir(args.out_dir or ".")
    out_path = os.path.join(out, "decodes.jsonl")
    with open(out_path, "w") as fh:
        for result in harness.decode_series(
            args.series, policy=args.policy, n_max=args.n_max, inst=inst
        ):
            fh.write(result.to_json() + "\n")
    print(f"wrote {out_path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="parityanneal")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON experiment config")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--out-dir", default=None)
        sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--no-figures", action="store_true")

    sp = sub.add_parser("toy-validate", help="three-spin chain validation")
    common(sp)
    sp.add_argument("--steps", type=int, default=1_000_000)
    sp.add_argument("--rf-steps", type=int, default=200_000)
    sp.add_argument("--k", type=float, default=0.25)
    sp.set_defaults(func=cmd_toy_validate)

    sp = sub.add_parser("gen-instance", help="generate a random instance")
    common(sp)
    sp.add_argument("--size", type=int, required=True)
    sp.add_argument("--half-width", type=float, default=0.25)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_gen_instance)

    sp = sub.add_parser("ground-truth", help="exhaustive ground-state oracle")
    common(sp)
    sp.add_argument("--instance", required=True)
    sp.set_defaults(func=cmd_ground_truth)

    sp = sub.add_parser("sweep", help="(beta, gamma) success landscape")
    common(sp)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("spectra", help="classified sample spectra at one point")
    common(sp)
    sp.set_defaults(func=cmd_spectra)

    sp = sub.add_parser("decode-series", help="replay a stored series offline")
    common(sp)
    sp.add_argument("--series", required=True)
    sp.add_argument("--policy", default="auto")
    sp.add_argument("--n-max", type=int, default=10)
    sp.add_argument("--instance", default=None)
    sp.set_defaults(func=cmd_decode_series)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except harness.ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
