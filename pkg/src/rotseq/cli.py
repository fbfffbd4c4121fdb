"""rotbench: benchmark, verify and model the rotation-sequence kernels.

Commands:
  run     time one algorithm over explicit sizes or a sweep, emit CSV
  verify  run the equivalence grids, exit nonzero on any failure
  model   print block-size bounds, memory-operation factors, I/O costs

CSV output uses the header ``n,Flops`` (Flops in Gflop/s); extra
columns appear only with --csv-extended. Exit codes: 0 success,
1 verification failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time
from dataclasses import dataclass

from .blocking import (
    BlockPlan,
    CacheSpec,
    apply_blocked_packed,
    choose_block_sizes,
    default_bound_chain,
    pack_row_block,
    unpack_row_block,
)
from .core import TransformKind, apply_naive
from .kernels import KernelShape
from .model import flops_applied, io_models, memops_basic, memops_fused, memops_kernel
from .oracle import compare
from .verification import (
    ALGORITHMS,
    FAULT_ENV,
    bitwise_grid,
    default_shape,
    make_inputs,
    oracle_grid,
    run_variant,
)

VERIFY_SIZE_LIMIT = 4_000_000


@dataclass
class RunRecord:
    algo: str
    m: int
    n: int
    k: int
    threads: int
    reps: int
    seconds_best: float
    gflops: float
    verified: bool | None

    def human(self) -> str:
        v = "-" if self.verified is None else ("ok" if self.verified else "FAIL")
        return (
            f"{self.algo:16s} m={self.m:<5d} n={self.n:<5d} k={self.k:<4d} "
            f"threads={self.threads} best={self.seconds_best:.6f}s "
            f"{self.gflops:9.4f} Gflop/s  verified={v}"
        )


def _parse_sweep(text: str) -> list[int]:
    try:
        start, stop, step = (int(x) for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"--sweep wants start:stop:step, got {text!r}")
    if step <= 0:
        raise argparse.ArgumentTypeError("--sweep step must be positive")
    return list(range(start, stop + 1, step))


def _read_config(path: str) -> dict:
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"bad config line (want key=value): {line!r}")
            key, val = (part.strip() for part in line.split("=", 1))
            out[key] = int(val)
    return out


def _shared_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--kind", choices=("rotation", "reflector"), default="rotation")
    p.add_argument("--m", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--k", type=int, default=180)
    p.add_argument("--sweep", type=_parse_sweep, metavar="START:STOP:STEP",
                   help="size sweep with m = n")
    p.add_argument("--mr", type=int, help="kernel rows per panel")
    p.add_argument("--kr", type=int, help="kernel transforms per wave")
    p.add_argument("--nb", type=int, help="waves per kernel call")
    p.add_argument("--kb", type=int, help="sequences per chunk")
    p.add_argument("--mb", type=int, help="rows per row block")
    p.add_argument("--T1", type=int)
    p.add_argument("--T2", type=int)
    p.add_argument("--T3", type=int)
    p.add_argument("--S", type=int, help="fast-memory size for the I/O model")
    p.add_argument("--threads", type=int)
    p.add_argument("--reps", type=int, default=3)
    p.add_argument("--seed", type=int, default=1234)
    p.add_argument("--strict-arith", choices=("on", "off"))
    p.add_argument("--csv", metavar="PATH", help="write CSV here instead of stdout")
    p.add_argument("--config", metavar="PATH", help="key=value cache spec file")
    p.add_argument("--verify-all", action="store_true",
                   help="verify every size, ignoring the size cutoff")
    p.add_argument("--csv-extended", action="store_true")


def _build_context(args) -> dict:
    cfg = _read_config(args.config) if args.config else {}
    cache_kwargs = {}
    for key in ("T1", "T2", "T3", "S", "line_bytes", "page_bytes"):
        if key in cfg:
            cache_kwargs[key] = cfg[key]
        flag = getattr(args, key, None)
        if flag is not None:
            cache_kwargs[key] = flag
    cache = CacheSpec(**cache_kwargs)
    threads = args.threads if args.threads is not None else cfg.get("threads", 1)
    if threads < 1:
        raise ValueError(f"--threads must be >= 1, got {threads}")
    m_b_cap = cfg.get("m_b_cap")
    mode = "strict" if getattr(args, "strict_arith", None) == "on" else "fast"
    if getattr(args, "strict_arith", None) is None and args.command == "verify":
        mode = "strict"
    if args.mr is not None or args.kr is not None:
        from .verification import DEFAULT_KR, DEFAULT_MR

        shape = KernelShape(
            m_r=args.mr if args.mr is not None else DEFAULT_MR,
            k_r=args.kr if args.kr is not None else DEFAULT_KR,
            mode=mode,
        )
    else:
        shape = default_shape(mode=mode)
    planned = choose_block_sizes(cache, shape, m_b_cap)
    if any(v is not None for v in (args.nb, args.kb, args.mb)):
        planned = BlockPlan(
            n_b=args.nb if args.nb is not None else planned.n_b,
            k_b=args.kb if args.kb is not None else planned.k_b,
            m_b=args.mb if args.mb is not None else planned.m_b,
            m_b_cap=planned.m_b_cap,
        )
    kind = TransformKind.REFLECTOR if args.kind == "reflector" else TransformKind.ROTATION
    return dict(cache=cache, threads=threads, shape=shape, plan=planned,
                kind=kind, fast=(mode == "fast"), m_b_cap=m_b_cap)


def _csv_sink(args):
    if args.csv:
        return open(args.csv, "w")
    return sys.stdout


def cmd_run(args) -> int:
    ctx = _build_context(args)
    if args.sweep is not None:
        sizes = [(s, s, args.k) for s in args.sweep]
    else:
        if args.n is None:
            raise ValueError("run needs --n (or --sweep)")
        sizes = [(args.m if args.m is not None else args.n, args.n, args.k)]
    kind, fast, shape, plan = ctx["kind"], ctx["fast"], ctx["shape"], ctx["plan"]
    threads = ctx["threads"]
    any_fail = False
    records = []
    for m, n, k in sizes:
        A0, seq = make_inputs(m, n, k, args.seed)
        if args.algo == "kernel-prepacked":
            packed = pack_row_block(A0, 0, m, shape.m_r)

            def one_rep():
                work = packed.copy()
                t0 = time.perf_counter()
                apply_blocked_packed(work, seq, plan, shape, kind=kind,
                                     threads=threads, fast=fast)
                return time.perf_counter() - t0, work
        else:

            def one_rep():
                work = A0.copy(order="F")
                t0 = time.perf_counter()
                run_variant(args.algo, work, seq, kind, fast=fast, plan=plan,
                            shape=shape, threads=threads)
                return time.perf_counter() - t0, work

        one_rep()  # warm-up (also JIT compile)
        best = math.inf
        last = None
        for _ in range(max(args.reps, 1)):
            dt, last = one_rep()
            best = min(best, dt)
        verified = None
        if args.verify_all or m * n <= VERIFY_SIZE_LIMIT:
            ref = A0.copy(order="F")
            apply_naive(ref, seq, kind)
            if args.algo == "kernel-prepacked":
                out = A0.copy(order="F")
                unpack_row_block(last, out, 0)
            else:
                out = last
            profile = "strict" if not fast else "fast"
            verified = bool(compare(ref, out, tol_profile=profile, k=k).passed)
            any_fail = any_fail or not verified
        rec = RunRecord(
            algo=args.algo, m=m, n=n, k=k, threads=threads, reps=args.reps,
            seconds_best=best,
            gflops=flops_applied(m, n, k) / best / 1e9,
            verified=verified,
        )
        records.append(rec)
        print(rec.human(), file=sys.stderr)
    sink = _csv_sink(args)
    try:
        if args.csv_extended:
            sink.write("n,Flops,algo,m,k,threads,reps,seconds,verified\n")
            for r in records:
                sink.write(
                    f"{r.n},{r.gflops:.9g},{r.algo},{r.m},{r.k},{r.threads},"
                    f"{r.reps},{r.seconds_best:.9g},{r.verified}\n"
                )
        else:
            sink.write("n,Flops\n")
            for r in records:
                sink.write(f"{r.n},{r.gflops:.9g}\n")
    finally:
        if sink is not sys.stdout:
            sink.close()
    return 1 if any_fail else 0


def cmd_verify(args) -> int:
    if args.perturb_kernel:
        os.environ[FAULT_ENV] = "1"
    try:
        kinds = (
            (TransformKind.ROTATION, TransformKind.REFLECTOR)
            if args.kind_given is None
            else ((TransformKind.REFLECTOR,) if args.kind == "reflector"
                  else (TransformKind.ROTATION,))
        )
        failures = []
        total = 0
        for kind in kinds:
            for case in bitwise_grid(kind, quick=args.quick, seed=args.seed):
                total += 1
                if not case.ok:
                    failures.append(case)
                    print(case, file=sys.stderr)
            for case in oracle_grid(kind, seed=args.seed):
                total += 1
                if not case.ok:
                    failures.append(case)
                    print(case, file=sys.stderr)
        print(f"verify: {total - len(failures)}/{total} cases passed")
        if failures:
            worst = failures[0]
            print(
                f"verify: FIRST FAILURE {worst.algo} [{worst.config}] "
                f"kind={worst.kind} m={worst.m} n={worst.n} k={worst.k}",
                file=sys.stderr,
            )
            return 1
        return 0
    finally:
        if args.perturb_kernel:
            os.environ.pop(FAULT_ENV, None)


def cmd_model(args) -> int:
    ctx = _build_context(args)
    cache, shape, plan = ctx["cache"], ctx["shape"], ctx["plan"]
    chain = default_bound_chain(cache, ctx["m_b_cap"])
    print(f"cache: T1={cache.T1} T2={cache.T2} T3={cache.T3} elements")
    print(
        "reference bounds: "
        f"n_b <= {chain['nb_raw']} (chosen {chain['nb']}), "
        f"k_b <= {chain['kb_raw']} (chosen {chain['kb']}), "
        f"m_b <= {chain['mb_raw']} (chosen {chain['mb']})"
    )
    nb_raw = (cache.T1 - shape.m_r * shape.k_r) // (shape.m_r + 2 * shape.k_r)
    kb_raw = (cache.T2 - shape.m_r * plan.n_b) // (shape.m_r + 2 * plan.n_b)
    mb_raw = cache.T3 // (plan.n_b + plan.k_b)
    print(
        f"shape {shape.m_r}x{shape.k_r}: raw bounds n_b <= {nb_raw}, "
        f"k_b <= {kb_raw} (at n_b={plan.n_b}), m_b <= {mb_raw}"
    )
    print(f"plan: n_b={plan.n_b} k_b={plan.k_b} m_b={plan.m_b}")
    kb_model = plan.k_b if plan.k_b < plan.n_b else plan.n_b - 1
    if kb_model != plan.k_b:
        print(f"(traffic table evaluated at k_b={kb_model}: formulas need k_b < n_b)")
    reports = [
        (memops_basic(plan.m_b, plan.n_b, kb_model),
         dict(m_b=plan.m_b, n_b=plan.n_b, k_b=kb_model)),
        (memops_fused(2, 2, plan.m_b, plan.n_b, kb_model),
         dict(n_r=2, k_r=2, m_b=plan.m_b, n_b=plan.n_b, k_b=kb_model)),
        (memops_kernel(shape.k_r, shape.m_r, plan.m_b, plan.n_b, kb_model),
         dict(k_r=shape.k_r, m_r=shape.m_r, m_b=plan.m_b, n_b=plan.n_b, k_b=kb_model)),
    ]
    asym = 2.0 / shape.k_r + 2.0 / shape.m_r
    for rep, _ in reports:
        print(f"memops {rep.formula_id:7s}: total={rep.total:.6g} "
              f"factor={rep.per_rotation_factor:.6g}")
    print(f"kernel asymptotic factor (2/k_r + 2/m_r): {asym:.6g} + 2/n_b")
    if args.io:
        S = args.S if args.S is not None else cache.S
        mb = args.mb if args.mb is not None else max(int(math.isqrt(S)), 1)
        kb = args.kb if args.kb is not None else max(int(math.isqrt(S)), 1)
        m = args.m if args.m is not None else (args.n or 1000)
        n = args.n if args.n is not None else 1000
        io = io_models(m, n, args.k, S, mb, kb)
        print(
            f"io model (m={m} n={n} k={args.k} S={S} m_b={mb} k_b={kb}):\n"
            f"  lower bound      {io.lower_bound:.6g} elements\n"
            f"  wavefront io     {io.wavefront_io:.6g} elements\n"
            f"  intensity bound  {io.op_intensity_bound:.6g} flops/element\n"
            f"  intensity wave   {io.op_intensity_wavefront:.6g} flops/element"
        )
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write("formula_id,params,loads,stores,total,factor\n")
            for rep, params in reports:
                fh.write(rep.csv_row(params) + "\n")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="rotbench",
        description="benchmark/verify/model rotation-sequence application",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="time one algorithm, emit CSV")
    p_run.add_argument("--algo", choices=ALGORITHMS, default="kernel")
    _shared_flags(p_run)

    p_verify = sub.add_parser("verify", help="equivalence grids, exit 1 on failure")
    _shared_flags(p_verify)
    p_verify.add_argument("--quick", action="store_true", help="smaller grid")
    p_verify.add_argument("--perturb-kernel", action="store_true",
                          help=argparse.SUPPRESS)

    p_model = sub.add_parser("model", help="block-size bounds and traffic models")
    _shared_flags(p_model)
    p_model.add_argument("--io", action="store_true", help="print the I/O model")

    args = parser.parse_args(argv)
    if argv is None:
        argv = sys.argv[1:]
    args.kind_given = (
        args.kind if any(a == "--kind" or a.startswith("--kind=") for a in argv) else None
    )

    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "verify":
            return cmd_verify(args)
        return cmd_model(args)
    except (ValueError, OSError) as exc:
        print(f"rotbench: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
