"""Command-line surface: evaluation harness, solver access, prompting.

Exit codes: 0 success, 1 usage error, 2 data/validation error, 3 runtime
or convergence error.  Human summaries go to stdout, machine-readable
JSON to --out; the two are never mixed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .core import CostMatrix, DiscreteMeasure
from .errors import AwtError, ClientError, NumericalOverflow, QuotaExhausted, UnknownId
from .manifest import TaskManifest, load_manifest, validate_manifest
from .npyio import read_array
from .pipeline import AwtConfig, EvaluationReport, TaskData, ablation_sweep, evaluate, view_measures
from .prompting import (
    API_KEY_ENV,
    DEFAULT_MODEL,
    DEFAULT_QUESTION_COUNT,
    DEFAULT_TEMPERATURE,
    DatasetSpec,
    FixtureClient,
    HttpChatClient,
    generate_description_bundle,
)
from .transport import SinkhornConfig, exact_ot, sinkhorn

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_RUNTIME = 3

_MODE_FLAGS = {"raw": "raw", "ensemble": "ensemble", "ot-uniform": "ot_uniform", "awt": "awt"}
_AXIS_FLAGS = {"n": "N", "m": "M", "gamma-v": "gamma_v", "gamma-t": "gamma_t", "epsilon": "epsilon"}


class _Parser(argparse.ArgumentParser):
    """argparse parser that exits with the documented usage code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(self.exit_code_on_error(message))

    def exit_code_on_error(self, message: str) -> int:
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        return EXIT_USAGE


# defaults shown in --help and applied when neither flag nor config file sets a value
_CONFIG_DEFAULTS = {
    "mode": "awt",
    "gamma_v": 0.5,
    "gamma_t": 0.5,
    "tau": 0.01,
    "epsilon": 0.1,
    "n_views": 50,
    "m_desc": 50,
    "max_iterations": 100,
    "tolerance": 1e-6,
    "log_domain": "auto",
    "ensemble_space": "embedding",
}


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    d = _CONFIG_DEFAULTS
    p.add_argument("--config", help="JSON config file; explicit flags override its values")
    p.add_argument("--mode", choices=sorted(_MODE_FLAGS), help=f"(default: {d['mode']})")
    p.add_argument("--gamma-v", type=float,
                   help=f"image-view weighting temperature (default: {d['gamma_v']})")
    p.add_argument("--gamma-t", type=float,
                   help=f"description weighting temperature (default: {d['gamma_t']})")
    p.add_argument("--tau", type=float,
                   help=f"classification softmax temperature (default: {d['tau']})")
    p.add_argument("--epsilon", type=float,
                   help=f"entropic regularization strength (default: {d['epsilon']})")
    p.add_argument("--n-views", type=int,
                   help=f"augmented image views to use, -1 = all (default: {d['n_views']})")
    p.add_argument("--m-desc", type=int,
                   help=f"descriptions per class to use, -1 = all (default: {d['m_desc']})")
    p.add_argument("--max-iterations", type=int, help=f"(default: {d['max_iterations']})")
    p.add_argument("--tolerance", type=float, help=f"(default: {d['tolerance']})")
    p.add_argument("--log-domain", choices=["auto", "on", "off"],
                   help=f"(default: {d['log_domain']})")
    p.add_argument("--ensemble-space", choices=["embedding", "probability"],
                   help=f"(default: {d['ensemble_space']})")


def _config_from_args(args) -> AwtConfig:
    """Resolve the pipeline config: flag > config file > built-in default."""
    file_cfg = {}
    if getattr(args, "config", None):
        try:
            file_cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise AwtError(f"cannot read config file {args.config}: {exc}") from exc
        if not isinstance(file_cfg, dict):
            raise AwtError(f"{args.config}: config file must hold a JSON object")
        unknown = set(file_cfg) - set(_CONFIG_DEFAULTS)
        if unknown:
            raise AwtError(f"{args.config}: unknown config keys {sorted(unknown)}")

    def pick(name):
        flag = getattr(args, name)
        if flag is not None:
            return flag
        return file_cfg.get(name, _CONFIG_DEFAULTS[name])

    n_views = int(pick("n_views"))
    m_desc = int(pick("m_desc"))
    log_domain = {"auto": None, "on": True, "off": False}[pick("log_domain")]
    return AwtConfig(
        n_image_views=None if n_views < 0 else n_views,
        m_descriptions=None if m_desc < 0 else m_desc,
        gamma_v=float(pick("gamma_v")),
        gamma_t=float(pick("gamma_t")),
        tau=float(pick("tau")),
        sinkhorn=SinkhornConfig(
            epsilon=float(pick("epsilon")),
            max_iterations=int(pick("max_iterations")),
            tolerance=float(pick("tolerance")),
            log_domain=log_domain,
        ),
        mode=_MODE_FLAGS[pick("mode")],
        ensemble_space=pick("ensemble_space"),
    )


def _write_json(path: str | Path, payload) -> None:
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def _load_valid_manifest(path: str) -> TaskManifest:
    manifest = load_manifest(path)
    diagnostics = validate_manifest(manifest)
    if diagnostics:
        for line in diagnostics:
            print(f"manifest: {line}", file=sys.stderr)
        raise AwtError(f"manifest failed validation with {len(diagnostics)} diagnostic(s)")
    return manifest


def _report_payload(report: EvaluationReport, include_probs: bool) -> dict:
    per_image = []
    for result, label in zip(report.results, report.labels):
        entry = {
            "id": result.image_id,
            "predicted": result.predicted_index,
            "label": label,
            "converged": result.converged,
        }
        if include_probs:
            entry["probs"] = [float(x) for x in result.probs.probs]
        per_image.append(entry)
    return {
        "config": report.config,
        "top1_accuracy": report.top1_accuracy,
        "per_class_accuracy": report.per_class_accuracy,
        "n_images": report.n_images,
        "per_image": per_image,
    }


def _cmd_evaluate(args) -> int:
    manifest = _load_valid_manifest(args.manifest)
    cfg = _config_from_args(args)
    report = evaluate(manifest, cfg, jobs=args.jobs)
    if args.strict and not all(r.converged for r in report.results):
        bad = [r.image_id for r in report.results if not r.converged]
        print(f"solver did not converge for: {', '.join(map(str, bad))}", file=sys.stderr)
        return EXIT_RUNTIME
    _write_json(args.out, _report_payload(report, args.probs))
    print(f"top1={100.0 * report.top1_accuracy:.2f}")
    return EXIT_OK


def _cmd_plan(args) -> int:
    manifest = _load_valid_manifest(args.manifest)
    cfg = _config_from_args(args)
    try:
        image_index = manifest.image_index(args.image)
    except KeyError:
        raise UnknownId(f"unknown image id {args.image!r}") from None
    try:
        class_index = manifest.class_index(args.class_name)
    except KeyError:
        raise UnknownId(f"unknown class name {args.class_name!r}") from None
    if cfg.mode in ("raw", "ensemble"):
        cfg = replace(cfg, mode="awt")
    data = TaskData(manifest, cfg)
    views = data.image_views(image_index)
    a, b_list = view_measures(views, data.class_views, cfg)
    from .transport import awt_distance

    result = awt_distance(views, a, data.class_views[class_index], b_list[class_index], cfg.sinkhorn)
    _write_json(
        args.out,
        {
            "image": args.image,
            "class": args.class_name,
            "cost": result.cost,
            "converged": result.plan.converged,
            "iterations": result.plan.iterations,
            "marginal_violation": result.plan.marginal_violation,
            "row_weights": [float(x) for x in a.weights],
            "col_weights": [float(x) for x in b_list[class_index].weights],
            "plan": [[float(x) for x in row] for row in result.plan.matrix],
        },
    )
    print(f"cost={result.cost:.6f}")
    return EXIT_OK


def _read_vector(path: str) -> np.ndarray:
    data = read_array(path).data.astype(np.float64)
    if 1 not in data.shape:
        raise AwtError(f"{path}: expected a vector stored as 1xK or Kx1, got {data.shape}")
    w = data.ravel()
    total = w.sum()
    # float32 storage quantizes the simplex; absorb that, reject real junk
    if abs(total - 1.0) > 1e-5:
        raise AwtError(f"{path}: weights sum to {total}, expected 1")
    return w / total


def _solver_payload(result, method: str) -> dict:
    return {
        "method": method,
        "cost": result.cost,
        "converged": result.plan.converged,
        "iterations": result.plan.iterations,
        "marginal_violation": result.plan.marginal_violation,
        "plan": [[float(x) for x in row] for row in result.plan.matrix],
    }


def _cmd_sinkhorn(args) -> int:
    cost = CostMatrix(read_array(args.cost).data)
    a = DiscreteMeasure(_read_vector(args.a))
    b = DiscreteMeasure(_read_vector(args.b))
    log_domain = {"auto": None, "on": True, "off": False}[args.log_domain]
    cfg = SinkhornConfig(
        epsilon=args.epsilon,
        max_iterations=args.max_iterations,
        tolerance=args.tolerance,
        log_domain=log_domain,
    )
    result = sinkhorn(cost, a, b, cfg)
    if args.strict and not result.plan.converged:
        print(
            f"no convergence after {result.plan.iterations} iterations "
            f"(violation {result.plan.marginal_violation:.3e})",
            file=sys.stderr,
        )
        return EXIT_RUNTIME
    _write_json(args.out, _solver_payload(result, "sinkhorn"))
    print(f"cost={result.cost:.9g}")
    return EXIT_OK


def _cmd_exact(args) -> int:
    cost = CostMatrix(read_array(args.cost).data)
    a = DiscreteMeasure(_read_vector(args.a))
    b = DiscreteMeasure(_read_vector(args.b))
    result = exact_ot(cost, a, b)
    _write_json(args.out, _solver_payload(result, "exact"))
    print(f"cost={result.cost:.9g}")
    return EXIT_OK


def _read_class_names(path: str) -> list[str]:
    text = Path(path).read_text(encoding="utf-8")
    if path.endswith(".json"):
        names = json.loads(text)
        if not isinstance(names, list) or not all(isinstance(n, str) for n in names):
            raise AwtError(f"{path}: expected a JSON array of class names")
        return names
    return [line.strip() for line in text.splitlines() if line.strip()]


def _cmd_gen_descriptions(args) -> int:
    if args.dataset_desc_file:
        description = Path(args.dataset_desc_file).read_text(encoding="utf-8").strip()
    else:
        description = args.dataset_desc or ""
    class_names = _read_class_names(args.classes)
    spec = DatasetSpec(name=args.dataset_name, description=description, class_names=tuple(class_names))

    if args.fixtures:
        client = FixtureClient(args.fixtures, model=args.model)
    elif args.endpoint and os.environ.get(API_KEY_ENV):
        client = HttpChatClient(args.endpoint, model=args.model)
    else:
        print(
            "no chat backend configured: pass --fixtures DIR for recorded replies, "
            f"or pass --endpoint URL and set {API_KEY_ENV}",
            file=sys.stderr,
        )
        return EXIT_USAGE

    bundle = generate_description_bundle(
        spec, client, q_count=args.questions, m=args.m, temperature=args.temperature
    )
    _write_json(args.out, bundle)
    print(f"classes={len(bundle['classes'])} descriptions_per_class={args.m}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    manifest = _load_valid_manifest(args.manifest)
    base_cfg = _config_from_args(args)
    axis = _AXIS_FLAGS[args.axis]
    raw_values = [v for v in args.values.split(",") if v.strip()]
    if not raw_values:
        raise AwtError("--values must list at least one value")
    values = [int(v) if axis in ("N", "M") else float(v) for v in raw_values]
    reports = ablation_sweep(manifest, base_cfg, axis, values, jobs=args.jobs)
    payload = {
        "axis": args.axis,
        "values": values,
        "reports": [
            {
                "value": value,
                "config": report.config,
                "top1_accuracy": report.top1_accuracy,
                "per_class_accuracy": report.per_class_accuracy,
                "n_images": report.n_images,
            }
            for value, report in zip(values, reports)
        ],
    }
    _write_json(args.out, payload)
    for value, report in zip(values, reports):
        print(f"{args.axis}={value} top1={100.0 * report.top1_accuracy:.2f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="awt", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("evaluate", help="classify every manifest image, report top-1 accuracy")
    p.add_argument("--manifest", required=True)
    _add_config_flags(p)
    p.add_argument("--out", required=True, help="results JSON path")
    p.add_argument("--jobs", type=int, default=1, help="worker threads")
    p.add_argument("--strict", action="store_true", help="exit 3 if any transport solve diverges")
    p.add_argument("--probs", action="store_true", help="include per-image probabilities")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("plan", help="dump the transport plan for one (image, class) pair")
    p.add_argument("--manifest", required=True)
    p.add_argument("--image", required=True, help="image id")
    p.add_argument("--class", dest="class_name", required=True, help="class name")
    _add_config_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_plan)

    p = sub.add_parser("sinkhorn", help="run the entropic solver on explicit arrays")
    p.add_argument("--cost", required=True, help="cost matrix array file")
    p.add_argument("--a", required=True, help="row measure (1xK array file)")
    p.add_argument("--b", required=True, help="column measure (1xK array file)")
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--max-iterations", type=int, default=100)
    p.add_argument("--tolerance", type=float, default=1e-6)
    p.add_argument("--log-domain", choices=["auto", "on", "off"], default="auto")
    p.add_argument("--strict", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_sinkhorn)

    p = sub.add_parser("exact", help="run the exact transportation solver (desk scale)")
    p.add_argument("--cost", required=True)
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_exact)

    p = sub.add_parser("gen-descriptions", help="two-step question/description generation")
    p.add_argument("--dataset-name", default="dataset")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--dataset-desc", help="dataset-level description text")
    group.add_argument("--dataset-desc-file", help="file holding the description")
    p.add_argument("--classes", required=True, help="class names (JSON array or one per line)")
    p.add_argument("--questions", type=int, default=DEFAULT_QUESTION_COUNT)
    p.add_argument("--m", type=int, default=50, help="descriptions per class")
    p.add_argument("--endpoint", help="chat-completion endpoint URL")
    p.add_argument("--model", default=DEFAULT_MODEL)
    p.add_argument("--temperature", type=float, default=DEFAULT_TEMPERATURE)
    p.add_argument("--fixtures", help="directory of recorded replies (offline mode)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen_descriptions)

    p = sub.add_parser("sweep", help="re-evaluate along one configuration axis")
    p.add_argument("--manifest", required=True)
    p.add_argument("--axis", choices=sorted(_AXIS_FLAGS), required=True)
    p.add_argument("--values", required=True, help="comma-separated values")
    _add_config_flags(p)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_sweep)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except NumericalOverflow as exc:
        print(f"awt: solver overflow: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except QuotaExhausted as exc:
        print(f"awt: gave up after bounded retries: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except ClientError as exc:
        print(f"awt: chat client error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except AwtError as exc:
        print(f"awt: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"awt: invalid argument: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"awt: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    raise SystemExit(main())
