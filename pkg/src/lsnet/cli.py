"""``lsnet`` command-line tool.

Exit codes: 0 success, 1 a convergence diagnostic failed, 2 usage or
configuration error, 3 data error, 4 numeric failure.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io as _io
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .classical import (
    SolverConfig,
    SolverState,
    check_sufficient_decrease,
    check_vanishing_increments,
    lps_solve,
)
from .encoding import EncodingOperator, make_cartesian_mask
from .exceptions import DataError, DimensionError, NumericError, ParameterError
from .io import (
    read_checkpoint,
    read_cxt,
    read_manifest,
    read_operator,
    read_sample,
    read_train_state,
    write_checkpoint,
    write_cxt,
    write_manifest,
    write_sample,
    write_train_state,
)
from .metrics import mse, psnr, ssim
from .phantom import CoilConfig, MaskConfig, PhantomSpec, make_dataset
from .training import TrainConfig, train
from .unrolled import LsNetParams, lsnet_backward, lsnet_forward, loss_mse

logger = logging.getLogger("lsnet")

EXIT_OK, EXIT_CHECK_FAILED, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3, 4


# -- configuration files -------------------------------------------------------

def _coerce(value: str, default):
    if isinstance(default, bool):
        v = value.lower()
        if v in ("1", "true", "yes", "on"):
            return True
        if v in ("0", "false", "no", "off"):
            return False
        raise ValueError(value)
    if isinstance(default, int):
        return int(value)
    if isinstance(default, float):
        return float(value)
    return value


def config_from(cls, entries: dict, source="config"):
    """Build dataclass ``cls`` from string ``entries`` that name its fields;
    unknown keys are ignored, values are coerced to the default's type."""
    kw = {}
    for f in dataclasses.fields(cls):
        if f.name in entries:
            try:
                kw[f.name] = _coerce(entries[f.name], f.default)
            except ValueError as e:
                raise ParameterError(f"{source}: bad value {entries[f.name]!r} for {f.name}") from e
    return cls(**kw)


@dataclasses.dataclass(frozen=True)
class DataConfig:
    n_samples: int = 1
    nx: int = 32
    ny: int = 32
    nt: int = 8
    rank: int = 3
    n_blobs: int = 2
    noise_std: float = 0.0
    seed: int = 0
    af: float = 4.0
    n_center: int = 4
    n_coils: int = 1
    coil_seed: int = 0

    def phantom(self) -> PhantomSpec:
        return PhantomSpec(self.nx, self.ny, self.nt, self.rank, self.n_blobs, self.noise_std, 0)


@dataclasses.dataclass(frozen=True)
class ModelConfig:
    n_iter: int = 10
    channels: int = 32
    alpha: float = 0.01
    beta0: float = -2.0
    gamma0: float = 1.0
    init_seed: int = 0
    zero_last_layer: bool = False

    def initial(self) -> LsNetParams:
        return LsNetParams.initial(self.n_iter, (4, self.channels, self.channels, 2),
                                   self.init_seed, self.beta0, self.gamma0, self.alpha,
                                   self.zero_last_layer)


def _threads() -> int:
    raw = os.environ.get("LSNET_THREADS", "0")
    try:
        n = int(raw)
    except ValueError as e:
        raise ParameterError(f"LSNET_THREADS must be an integer, got {raw!r}") from e
    if n < 0:
        raise ParameterError("LSNET_THREADS must be >= 0")
    return n or (os.cpu_count() or 1)


# -- commands ------------------------------------------------------------------

def cmd_gen_data(args) -> int:
    cfg = config_from(DataConfig, read_manifest(args.spec), args.spec)
    cfg.phantom().validate()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    coils = CoilConfig(cfg.n_coils, cfg.coil_seed) if cfg.n_coils > 1 else None
    samples = make_dataset(cfg.n_samples, cfg.phantom(), MaskConfig(cfg.af, cfg.n_center), coils,
                           seed=cfg.seed)
    names = [f"sample_{i:04d}" for i in range(len(samples))]
    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        list(pool.map(lambda a: write_sample(out / a[0], a[1]), zip(names, samples)))
    entries = {k: v for k, v in dataclasses.asdict(cfg).items()}
    if samples:
        entries["realized_af"] = repr(float(np.mean([s.op.mask.realized_af for s in samples])))
    for i, (name, s) in enumerate(zip(names, samples)):
        entries[f"sample_{i}"] = name
        entries[f"sample_{i}_phantom_seed"] = s.spec.seed
        entries[f"sample_{i}_mask_seed"] = s.op.mask.seed
    write_manifest(out / "manifest.txt", entries)
    print(f"wrote {len(samples)} samples to {out}")
    return EXIT_OK


def load_dataset(directory) -> list:
    d = Path(directory)
    m = read_manifest(d / "manifest.txt")
    n = int(m.get("n_samples", "0"))
    return [read_sample(d / m[f"sample_{i}"]) for i in range(n)]


def cmd_train(args) -> int:
    entries = read_manifest(args.config)
    tcfg = config_from(TrainConfig, entries, args.config)
    mcfg = config_from(ModelConfig, entries, args.config)
    tcfg.validate()
    data = load_dataset(args.data)
    if not data:
        raise DataError(f"{args.data}: dataset is empty")
    out = Path(args.out)
    record = None
    if args.resume:
        params = read_checkpoint(args.resume)
        record = read_train_state(f"{args.resume}.state.npz")
    else:
        params = mcfg.initial()
    params, record = train(params, data, tcfg, record)
    write_checkpoint(out, params)
    write_train_state(f"{out}.state.npz", record)
    loss_csv = Path(args.loss_csv) if args.loss_csv else out.with_name(out.name + ".loss.csv")
    with open(loss_csv, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["epoch", "mean_loss", "lr"])
        for e, (loss, lr) in enumerate(zip(record.losses, record.lrs)):
            w.writerow([e, repr(loss), repr(lr)])
    if record.diverged:
        print(f"training diverged at epoch {record.epoch}", file=sys.stderr)
        return EXIT_NUMERIC
    print(f"trained {record.epoch} epochs; checkpoint {out}; losses {loss_csv}")
    return EXIT_OK


def write_solver_log(path, state: SolverState, cfg: SolverConfig) -> None:
    with open(path, "w", newline="") as f:
        f.write(f"# rho={cfg.rho!r} eta={cfg.eta!r} lambda_L={cfg.lambda_L!r} "
                f"lambda_S={cfg.lambda_S!r}\n")
        w = csv.writer(f)
        w.writerow(["k", "penalty", "increment"])
        for k, pen in enumerate(state.penalty_history):
            inc = state.increment_history[k] if k < len(state.increment_history) else ""
            w.writerow([k, repr(pen), repr(inc) if inc != "" else ""])


def read_solver_log(path) -> SolverState:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise DataError(f"cannot read {path}: {e}") from e
    lines = text.splitlines()
    if not lines or not lines[0].startswith("#"):
        raise DataError(f"{path}: missing solver log header")
    meta = dict(tok.split("=", 1) for tok in lines[0][1:].split() if "=" in tok)
    try:
        rho = float(meta["rho"])
        rows = list(csv.DictReader(_io.StringIO("\n".join(lines[1:]))))
        pen = [float(r["penalty"]) for r in rows]
        inc = [float(r["increment"]) for r in rows if r["increment"]]
    except (KeyError, ValueError) as e:
        raise DataError(f"{path}: malformed solver log ({e})") from e
    empty = np.zeros(0)
    return SolverState(empty, empty, empty, len(inc), pen, inc, rho)


def cmd_recon(args) -> int:
    op = read_operator(args.op)
    y = read_cxt(args.input)
    if y.shape != op.kspace_shape:
        raise DimensionError(f"{args.input}: shape {y.shape} != operator k-space {op.kspace_shape}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    if args.ckpt:
        params = read_checkpoint(args.ckpt)
        X, L, S, _ = lsnet_forward(y, op, params)
    else:
        scfg = config_from(SolverConfig, read_manifest(args.classical), args.classical)
        scfg = dataclasses.replace(scfg, log_penalty=bool(args.log))
        state = lps_solve(y, op, scfg)
        X, L, S = state.X, state.L, state.S
        if args.log:
            write_solver_log(args.log, state, scfg)
    elapsed = time.perf_counter() - t0
    write_cxt(out / "X.cxt", X)
    write_cxt(out / "L.cxt", L)
    write_cxt(out / "S.cxt", S)
    print(f"reconstruction took {elapsed:.3f} s; wrote X, L, S to {out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    x = read_cxt(args.recon)
    ref = read_cxt(args.ref)
    if x.shape != ref.shape:
        raise DimensionError(f"{args.recon} has shape {x.shape}, {args.ref} has {ref.shape}")
    p = psnr(x, ref)
    row = [repr(mse(x, ref)), "inf" if np.isinf(p) else repr(p), repr(ssim(x, ref))]
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["mse", "psnr_db", "ssim"])
    w.writerow(row)
    if args.out:
        Path(args.out).write_text(buf.getvalue())
    sys.stdout.write(buf.getvalue())
    return EXIT_OK


def cmd_diagnose(args) -> int:
    state = read_solver_log(args.run)
    reports = [
        check_sufficient_decrease(state, slack=args.slack),
        check_vanishing_increments(state, threshold=args.threshold),
    ]
    for r in reports:
        print(r)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_CHECK_FAILED


def _best_of(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench(nx, ny, nt, blocks, channels=8, repeat=3, seed=0) -> dict:
    """Best-of-``repeat`` wall-clock seconds for a network forward pass, its
    backward pass and one classical iteration on a random problem."""
    rng = np.random.default_rng(seed)
    mask = make_cartesian_mask(ny, nt, 4 if ny >= 8 else 1, min(4, ny), seed)
    op = EncodingOperator(mask, (nx, ny, nt))
    x = rng.standard_normal((nx, ny, nt)) + 1j * rng.standard_normal((nx, ny, nt))
    y = op.forward(x)
    params = LsNetParams.initial(blocks, (4, channels, channels, 2), seed)
    holder = {}

    def fwd():
        holder["out"] = lsnet_forward(y, op, params)

    def bwd():
        X, _, _, tape = holder["out"]
        lsnet_backward(tape, loss_mse(X, x)[1])

    scfg = SolverConfig(max_iter=1, log_penalty=False)
    return {
        "nx": nx, "ny": ny, "nt": nt, "blocks": blocks,
        "forward_s": _best_of(fwd, repeat),
        "backward_s": _best_of(bwd, repeat),
        "classical_iter_s": _best_of(lambda: lps_solve(y, op, scfg), repeat),
    }


def cmd_bench(args) -> int:
    try:
        nx, ny, nt = (int(v) for v in args.size.split(","))
    except ValueError as e:
        raise ParameterError(f"--size must be nx,ny,nt, got {args.size!r}") from e
    row = bench(nx, ny, nt, args.blocks, args.channels, args.repeat)
    w = csv.DictWriter(sys.stdout, fieldnames=list(row), lineterminator="\n")
    w.writeheader()
    w.writerow({k: (f"{v:.6f}" if isinstance(v, float) else v) for k, v in row.items()})
    return EXIT_OK


# -- entry point ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lsnet", description="Low-rank + sparse dynamic MRI reconstruction")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="generate synthetic undersampled phantoms")
    g.add_argument("--spec", required=True, help="key=value data config")
    g.add_argument("--out", required=True, help="output directory")
    g.set_defaults(func=cmd_gen_data)

    t = sub.add_parser("train", help="train the unrolled network")
    t.add_argument("--data", required=True, help="directory written by gen-data")
    t.add_argument("--config", required=True, help="key=value training/model config")
    t.add_argument("--out", required=True, help="checkpoint path")
    t.add_argument("--loss-csv", help="loss curve path (default: <out>.loss.csv)")
    t.add_argument("--resume", help="checkpoint to continue from (reads <ckpt>.state.npz)")
    t.set_defaults(func=cmd_train)

    r = sub.add_parser("recon", help="reconstruct X, L, S from k-space")
    r.add_argument("--input", required=True, help="k-space y.cxt")
    r.add_argument("--op", required=True, help="operator manifest")
    mode = r.add_mutually_exclusive_group(required=True)
    mode.add_argument("--ckpt", help="network checkpoint")
    mode.add_argument("--classical", help="key=value solver config")
    r.add_argument("--out", default=".", help="output directory")
    r.add_argument("--log", help="solver log path (classical mode)")
    r.set_defaults(func=cmd_recon)

    e = sub.add_parser("eval", help="MSE / PSNR / SSIM report")
    e.add_argument("--recon", required=True)
    e.add_argument("--ref", required=True)
    e.add_argument("--out", help="also write the CSV here")
    e.set_defaults(func=cmd_eval)

    d = sub.add_parser("diagnose-convergence", help="check a classical solver log")
    d.add_argument("--run", required=True, help="log written by recon --log")
    d.add_argument("--threshold", type=float, default=1e-6)
    d.add_argument("--slack", type=float, default=1e-9)
    d.set_defaults(func=cmd_diagnose)

    b = sub.add_parser("bench", help="time forward, backward and a classical iteration")
    b.add_argument("--size", required=True, help="nx,ny,nt")
    b.add_argument("--blocks", type=int, default=10)
    b.add_argument("--channels", type=int, default=8)
    b.add_argument("--repeat", type=int, default=3)
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ParameterError as e:
        print(f"lsnet: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, DimensionError, OSError) as e:
        print(f"lsnet: data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as e:
        print(f"lsnet: numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
