"""Command-line driver for the coded convolution experiments.

Subcommands:

* ``run``             execute one configured layer end to end, emit a JSON record
* ``stability``       condition-number / decode-MSE sweep over random worker
                      subsets, rotation codec vs. real-Vandermonde baseline (CSV)
* ``straggler-sweep`` makespan as a function of injected straggler count (CSV)
* ``optimize``        minimum-cost (k_a, k_b) table for registry models or
                      explicit dims
* ``verify``          run the built-in invariant suite

Exit codes: 0 success, 1 configuration error, 2 decode infeasible,
3 starvation.  All CSV output uses period decimals and 9-significant-digit
scientific notation, so reruns are bitwise reproducible.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass

import numpy as np

from . import codec as _codec
from . import verify as _verify
from .costs import CostCoefficients, LayerDims, optimize_discrete, registry_layers
from .errors import (
    CodedConvError,
    ConfigError,
    DecodeInfeasibleError,
    ParameterError,
    StarvationError,
)
from .partition import merge_output
from .simulation import (
    CODECS,
    SimConfig,
    TimeModel,
    WorkerSpec,
    dispatch,
    run_end_to_end,
    worker_compute,
)
from .tensors import ConvParams, conv3d_ref, mse

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DECODE_INFEASIBLE = 2
EXIT_STARVATION = 3


def _fmt(value) -> str:
    """CSV cell formatting: integers verbatim, reals as 9-significant-digit sci."""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{value:.8e}"
    return str(value)


def format_csv(header: list[str], rows: list[tuple]) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def _write(text: str, out_path: str | None):
    if out_path is None:
        sys.stdout.write(text)
    else:
        with open(out_path, "w") as fh:
            fh.write(text)


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------

_LAYER_FIELDS = ("c", "h", "w", "n_out", "kernel_h", "kernel_w", "stride", "padding")


@dataclass(frozen=True)
class RunConfig:
    layer: LayerDims
    n: int
    k_a: int
    k_b: int
    seed: int
    codec: str
    stragglers: tuple[WorkerSpec, ...]
    time_model: TimeModel
    cost: CostCoefficients | None


def load_run_config(path: str, codec_override: str | None = None, seed_override: int | None = None) -> RunConfig:
    """Parse and validate a JSON run configuration.

    Every violation is collected so a single failure report names all
    offending fields.  n, k_a, k_b, seed, codec, and the full layer
    geometry are mandatory; there are no silent defaults for them.
    """
    problems: list[str] = []
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError([f"{path}: no such file"])
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{path}: invalid JSON ({exc})"])
    if not isinstance(raw, dict):
        raise ConfigError([f"{path}: top level must be an object"])

    def need_int(obj, key, path_prefix="", minimum=None):
        val = obj.get(key)
        where = f"{path_prefix}{key}"
        if val is None:
            problems.append(f"{where}: required field missing")
            return None
        if not isinstance(val, int) or isinstance(val, bool):
            problems.append(f"{where}: expected an integer, got {val!r}")
            return None
        if minimum is not None and val < minimum:
            problems.append(f"{where}: must be >= {minimum}, got {val}")
            return None
        return val

    layer_raw = raw.get("layer")
    layer = None
    if not isinstance(layer_raw, dict):
        problems.append("layer: required object missing")
    else:
        vals = {}
        for f in _LAYER_FIELDS:
            minimum = 0 if f == "padding" else 1
            vals[f] = need_int(layer_raw, f, "layer.", minimum)
        if all(v is not None for v in vals.values()):
            try:
                layer = LayerDims(**vals)
            except CodedConvError as exc:
                problems.append(f"layer: {exc}")

    n = need_int(raw, "n", minimum=1)
    k_a = need_int(raw, "k_a", minimum=1)
    k_b = need_int(raw, "k_b", minimum=1)
    seed = need_int(raw, "seed", minimum=0)

    codec = raw.get("codec")
    if codec is None:
        problems.append("codec: required field missing")
    elif codec not in CODECS:
        problems.append(f"codec: must be one of {list(CODECS)}, got {codec!r}")

    stragglers: list[WorkerSpec] = []
    for idx, entry in enumerate(raw.get("stragglers", [])):
        if not isinstance(entry, dict):
            problems.append(f"stragglers[{idx}]: expected an object")
            continue
        wid = need_int(entry, "id", f"stragglers[{idx}].", 0)
        delay = entry.get("delay_s")
        if not isinstance(delay, (int, float)) or isinstance(delay, bool) or delay < 0:
            problems.append(f"stragglers[{idx}].delay_s: expected a number >= 0, got {delay!r}")
            delay = None
        if wid is not None and delay is not None:
            stragglers.append(WorkerSpec(worker_id=wid, extra_delay=float(delay)))
    for idx, wid in enumerate(raw.get("failed", [])):
        if not isinstance(wid, int) or isinstance(wid, bool) or wid < 0:
            problems.append(f"failed[{idx}]: expected an integer worker id, got {wid!r}")
        else:
            stragglers.append(WorkerSpec(worker_id=wid, failed=True))

    tm_raw = raw.get("time_model", {})
    time_model = TimeModel()
    if not isinstance(tm_raw, dict):
        problems.append("time_model: expected an object")
    else:
        kwargs = {}
        for key in ("sec_per_mac", "sec_per_entry"):
            if key in tm_raw:
                val = tm_raw[key]
                if not isinstance(val, (int, float)) or isinstance(val, bool) or val < 0:
                    problems.append(f"time_model.{key}: expected a number >= 0, got {val!r}")
                else:
                    kwargs[key] = float(val)
        time_model = TimeModel(**kwargs)

    cost = None
    if "cost" in raw:
        cost_raw = raw["cost"]
        if not isinstance(cost_raw, dict):
            problems.append("cost: expected an object")
        else:
            kwargs = {}
            for key in ("lambda_comm", "lambda_comp", "lambda_store"):
                val = cost_raw.get(key, 0.0)
                if not isinstance(val, (int, float)) or isinstance(val, bool) or val < 0:
                    problems.append(f"cost.{key}: expected a number >= 0, got {val!r}")
                else:
                    kwargs[key] = float(val)
            if len(kwargs) == 3:
                cost = CostCoefficients(**kwargs)

    # cross-field preconditions, aggregated so one report names everything
    effective_codec = codec_override or codec
    if layer is not None and None not in (n, k_a, k_b) and effective_codec in CODECS:
        for name, val in (("k_a", k_a), ("k_b", k_b)):
            if not (val == 1 or val % 2 == 0):
                problems.append(f"{name}: must be 1 or even, got {val}")
        if layer.n_out % k_b != 0:
            problems.append(f"k_b: {layer.n_out} output channels not divisible by {k_b}")
        out_h = layer.out_hw[0]
        if out_h < k_a:
            problems.append(f"k_a: output height {out_h} admits at most {out_h} slices")
        if effective_codec == "crme":
            if k_a < 2 or k_b < 2:
                problems.append(
                    f"codec: crme needs even k_a and k_b >= 2, got ({k_a}, {k_b}); "
                    "use codec 'uncoded' for factor-1 splits"
                )
            elif k_a * k_b // 4 > n:
                problems.append(f"n: recovery threshold {k_a * k_b // 4} exceeds {n} workers")
        elif effective_codec == "real-vandermonde" and k_a * k_b > n:
            problems.append(f"n: recovery threshold {k_a * k_b} exceeds {n} workers")
        elif effective_codec == "uncoded" and n < k_a * k_b:
            problems.append(f"n: uncoded mode needs at least {k_a * k_b} workers, got {n}")
    if n is not None:
        ids = [s.worker_id for s in stragglers]
        if len(set(ids)) != len(ids):
            problems.append(f"stragglers/failed: duplicate worker ids {ids}")
        for wid in ids:
            if wid >= n:
                problems.append(f"stragglers/failed: worker id {wid} not in [0, {n})")

    if problems:
        raise ConfigError(problems)
    return RunConfig(
        layer=layer,
        n=n,
        k_a=k_a,
        k_b=k_b,
        seed=seed if seed_override is None else seed_override,
        codec=codec_override or codec,
        stragglers=tuple(stragglers),
        time_model=time_model,
        cost=cost,
    )


def synth_instance(layer: LayerDims, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Seeded standard-normal input and filter tensors for one layer."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((layer.c, layer.h, layer.w))
    filt = rng.standard_normal((layer.n_out, layer.c, layer.kernel_h, layer.kernel_w))
    return x, filt


def run_record(cfg: RunConfig) -> dict:
    """Execute one configured run and return its flat result record."""
    x, filt = synth_instance(cfg.layer, cfg.seed)
    sim = SimConfig(
        n=cfg.n,
        k_a=cfg.k_a,
        k_b=cfg.k_b,
        params=cfg.layer.conv_params,
        codec=cfg.codec,
        stragglers=cfg.stragglers,
        seed=cfg.seed,
        time_model=cfg.time_model,
    )
    y, report = run_end_to_end(x, filt, sim)
    reference = conv3d_ref(x, filt, cfg.layer.conv_params)
    record = report.as_record()
    record["mse"] = mse(y, reference)
    record["seed"] = cfg.seed
    return record


def cmd_run(args) -> int:
    cfg = load_run_config(args.config, codec_override=args.codec, seed_override=args.seed)
    record = run_record(cfg)
    _write(json.dumps(record, sort_keys=True) + "\n", args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# stability
# ---------------------------------------------------------------------------


def _baseline_factors(k_a: int, k_b: int) -> tuple[int, int]:
    """Factorization of the matched threshold delta = k_a*k_b/4 for the baseline."""
    if k_b % 4 == 0:
        return k_a, k_b // 4
    if k_a % 4 == 0:
        return k_a // 4, k_b
    return k_a // 2, k_b // 2


def stability_rows(
    ns: list[int], pairs: list[tuple[int, int]], trials: int, seed: int
) -> list[tuple]:
    """Per-subset condition number and decode MSE for both codecs.

    Each (n, (k_a, k_b)) entry fixes the rotation codec; the baseline runs
    at the matched recovery threshold delta = k_a*k_b/4 on the same random
    subsets and the same tiny convolution instance.  Worker outputs are
    computed once per config; only the recovery matrix varies per subset.
    """
    if len(ns) != len(pairs):
        raise ParameterError(f"{len(ns)} worker counts but {len(pairs)} partition pairs")
    rows = []
    for cfg_idx, (n, (k_a, k_b)) in enumerate(zip(ns, pairs)):
        book = _codec.build_codebook(n, k_a, k_b)
        delta = book.delta
        vk_a, vk_b = _baseline_factors(k_a, k_b)
        vcode = _codec.build_vandermonde_code(n, vk_a, vk_b)

        # One-output-row-per-slice instance, sized so both codecs partition it.
        params = ConvParams(stride=1, padding=0)
        layer = LayerDims(c=1, h=k_a + 1, w=3, n_out=k_b, kernel_h=2, kernel_w=2)
        rng = np.random.default_rng([seed, cfg_idx])
        x, filt = synth_instance(layer, int(rng.integers(2**32)))
        reference = conv3d_ref(x, filt, params)

        cfg = SimConfig(n=n, k_a=k_a, k_b=k_b, params=params, codec="crme")
        plan = dispatch(x, filt, cfg)
        outs = [worker_compute(t, cfg.time_model) for t in plan.subtasks]
        g = _codec.joint_generator(book)

        vcfg = SimConfig(n=n, k_a=vk_a, k_b=vk_b, params=params, codec="real-vandermonde")
        vplan = dispatch(x, filt, vcfg)
        vouts = [worker_compute(t, vcfg.time_model) for t in vplan.subtasks]

        for subset_id in range(trials):
            subset = sorted(rng.choice(n, size=delta, replace=False).tolist())

            recovery = _codec.build_recovery(g, subset)
            blocks = _codec.decode_blocks(
                [outs[i].blocks for i in subset], recovery, k_a, k_b, plan.block_dims
            )
            y = merge_output(blocks, k_a, k_b, plan.spatial_plan)
            rows.append(
                ("crme", n, k_a, k_b, delta, subset_id, recovery.kappa, mse(y, reference))
            )

            vrecovery = _codec.vandermonde_recovery(vcode, subset)
            vblocks = _codec.vandermonde_decode(
                [vouts[i].blocks[0] for i in subset], vrecovery, vk_a, vk_b, vplan.block_dims
            )
            vy = merge_output(vblocks, vk_a, vk_b, vplan.spatial_plan)
            rows.append(
                (
                    "real-vandermonde",
                    n,
                    vk_a,
                    vk_b,
                    delta,
                    subset_id,
                    vrecovery.kappa,
                    mse(vy, reference),
                )
            )
    return rows


STABILITY_HEADER = ["codec", "n", "k_a", "k_b", "delta", "subset_id", "kappa", "mse"]


def _parse_int_list(text: str, flag: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v]
    except ValueError:
        raise ConfigError([f"{flag}: expected comma-separated integers, got '{text}'"])


def cmd_stability(args) -> int:
    ns = _parse_int_list(args.n, "--n")
    pairs = []
    for token in args.pairs.split(","):
        if not token:
            continue
        ka, _, kb = token.partition("x")
        try:
            pairs.append((int(ka), int(kb)))
        except ValueError:
            raise ConfigError([f"--pairs: expected entries like 8x8, got '{token}'"])
    rows = stability_rows(ns, pairs, args.trials, args.seed)
    _write(format_csv(STABILITY_HEADER, rows), args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# straggler-sweep
# ---------------------------------------------------------------------------

SWEEP_HEADER = ["stragglers", "delay_s", "makespan"]


def straggler_rows(cfg: RunConfig, max_stragglers: int, delay: float) -> list[tuple]:
    """Makespan for 0..max_stragglers delayed workers (lowest ids first)."""
    x, filt = synth_instance(cfg.layer, cfg.seed)
    rows = []
    for count in range(max_stragglers + 1):
        sim = SimConfig(
            n=cfg.n,
            k_a=cfg.k_a,
            k_b=cfg.k_b,
            params=cfg.layer.conv_params,
            codec=cfg.codec,
            stragglers=tuple(
                WorkerSpec(worker_id=i, extra_delay=delay) for i in range(count)
            ),
            seed=cfg.seed,
            time_model=cfg.time_model,
        )
        _, report = run_end_to_end(x, filt, sim)
        rows.append((count, delay, report.makespan))
    return rows


def cmd_straggler_sweep(args) -> int:
    cfg = load_run_config(args.config, codec_override=args.codec, seed_override=args.seed)
    rows = straggler_rows(cfg, args.max_stragglers, args.delay)
    _write(format_csv(SWEEP_HEADER, rows), args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# optimize
# ---------------------------------------------------------------------------

OPTIMIZE_HEADER = ["layer", "q", "k_a", "k_b", "u_total"]


def optimize_rows(
    layers: list[tuple[str, LayerDims]], coeffs: CostCoefficients, q_list: list[int]
) -> list[tuple]:
    rows = []
    for name, dims in layers:
        for q in q_list:
            k_a, k_b, breakdown = optimize_discrete(dims, coeffs, q)
            rows.append((name, q, k_a, k_b, breakdown.total))
    return rows


def _parse_dims(spec: str) -> LayerDims:
    vals = {}
    for token in spec.split(","):
        if not token:
            continue
        key, _, val = token.partition("=")
        if key not in _LAYER_FIELDS:
            raise ConfigError([f"dims: unknown field '{key}' (expected {_LAYER_FIELDS})"])
        try:
            vals[key] = int(val)
        except ValueError:
            raise ConfigError([f"dims: {key} expects an integer, got '{val}'"])
    missing = [f for f in _LAYER_FIELDS if f not in vals and f not in ("stride", "padding")]
    if missing:
        raise ConfigError([f"dims: missing fields {missing}"])
    return LayerDims(**vals)


def cmd_optimize(args) -> int:
    if args.model:
        layers = registry_layers(args.model)
    elif args.dims:
        layers = [("layer", _parse_dims(args.dims))]
    else:
        raise ConfigError(["optimize: provide --model or --dims"])
    coeffs = CostCoefficients(
        lambda_comm=args.lambda_comm,
        lambda_comp=args.lambda_comp,
        lambda_store=args.lambda_store,
    )
    q_list = _parse_int_list(args.q, "--q")
    rows = optimize_rows(layers, coeffs, q_list)
    _write(format_csv(OPTIMIZE_HEADER, rows), args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # argparse would exit(2); 2 is reserved for decode-infeasible here.
        raise ConfigError([message])


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="codedconv", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one configured layer end to end")
    run_p.add_argument("--config", required=True, help="JSON run configuration")
    run_p.add_argument("--out", default=None, help="write the result record here")
    run_p.add_argument("--codec", choices=CODECS, default=None, help="override config codec")
    run_p.add_argument("--seed", type=int, default=None, help="override config seed")
    run_p.set_defaults(func=cmd_run)

    st_p = sub.add_parser("stability", help="condition-number / MSE subset sweep")
    st_p.add_argument("--n", required=True, help="comma-separated worker counts")
    st_p.add_argument("--pairs", required=True, help="comma-separated k_aXk_b pairs, e.g. 8x8,8x16")
    st_p.add_argument("--trials", type=int, required=True, help="random subsets per config")
    st_p.add_argument("--seed", type=int, default=0)
    st_p.add_argument("--out", default=None)
    st_p.set_defaults(func=cmd_stability)

    sw_p = sub.add_parser("straggler-sweep", help="makespan vs straggler count")
    sw_p.add_argument("--config", required=True)
    sw_p.add_argument("--max-stragglers", type=int, required=True)
    sw_p.add_argument("--delay", type=float, required=True, help="injected delay in seconds")
    sw_p.add_argument("--codec", choices=CODECS, default=None)
    sw_p.add_argument("--seed", type=int, default=None, help="override config seed")
    sw_p.add_argument("--out", default=None)
    sw_p.set_defaults(func=cmd_straggler_sweep)

    opt_p = sub.add_parser("optimize", help="minimum-cost partition table")
    opt_p.add_argument("--model", default=None, help="registry model name")
    opt_p.add_argument("--dims", default=None, help="explicit dims, e.g. c=6,h=14,w=14,n_out=16,kernel_h=5,kernel_w=5")
    opt_p.add_argument("--q", required=True, help="comma-separated subtask budgets")
    opt_p.add_argument("--lambda-comm", type=float, default=0.09)
    opt_p.add_argument("--lambda-comp", type=float, default=0.0)
    opt_p.add_argument("--lambda-store", type=float, default=0.023)
    opt_p.add_argument("--out", default=None)
    opt_p.set_defaults(func=cmd_optimize)

    ver_p = sub.add_parser("verify", help="run the built-in invariant suite")
    ver_p.set_defaults(func=lambda args: EXIT_OK if _verify.run_all() else EXIT_CONFIG)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CONFIG
    except DecodeInfeasibleError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_DECODE_INFEASIBLE
    except StarvationError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_STARVATION
    except CodedConvError as exc:
        # remaining shape/parameter errors are configuration problems
        print(str(exc), file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
