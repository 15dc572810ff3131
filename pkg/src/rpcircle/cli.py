"""Command-line entry point: ``rpcircle {analyze,flow,wkb,spectrum,escape}``.

Exit codes: 0 success, 1 invalid input or configuration, 2 disagreement
between independently computed verdicts, 3 a numerical module error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import platform
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .errors import RPCircleError
from .symbols import LowerOrderSymbol, LowerOrderTerm, PrincipalSymbol, describe
from .trigpoly import TrigPoly

EXIT_OK, EXIT_INPUT, EXIT_DISAGREE, EXIT_MODULE = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


# -- serialization ----------------------------------------------------------------


def _float_token(v: float) -> str:
    if math.isnan(v):
        return "NaN"
    if math.isinf(v):
        return "Infinity" if v > 0 else "-Infinity"
    return format(v, ".17g")


def _emit(obj, indent: int, level: int, out: list) -> None:
    pad = "\n" + " " * (indent * (level + 1))
    end = "\n" + " " * (indent * level)
    if isinstance(obj, (bool, np.bool_)):
        out.append("true" if obj else "false")
    elif obj is None:
        out.append("null")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(_float_token(float(obj)))
    elif isinstance(obj, (complex, np.complexfloating)):
        _emit([obj.real, obj.imag], indent, level, out)
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{")
        for i, (k, v) in enumerate(obj.items()):
            out.append(("," if i else "") + pad + json.dumps(str(k)) + ": ")
            _emit(v, indent, level + 1, out)
        out.append(end + "}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        items = list(obj)
        if not items:
            out.append("[]")
            return
        out.append("[")
        for i, v in enumerate(items):
            out.append(("," if i else "") + pad)
            _emit(v, indent, level + 1, out)
        out.append(end + "]")
    elif hasattr(obj, "value"):
        _emit(obj.value, indent, level, out)
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    """JSON with every float written to 17 significant digits (byte-stable)."""
    out: list = []
    _emit(obj, indent, 0, out)
    return "".join(out) + "\n"


def write_json(path: Path, obj) -> None:
    path.write_text(dumps(obj))


# -- configuration ----------------------------------------------------------------


@dataclass
class SymbolConfig:
    """Parsed operator description.

    JSON layout::

        {"m": 2, "a_plus": {"cos": [...], "sin": [...]}, "a_minus": {...},
         "V": {"kappa": 1, "terms": [{"j": 1, "power": 1, "re": 0.5, "im": 0}]},
         "divergence": {"a": {...}, "scale": 1.0}}

    ``a`` may replace ``a_plus``/``a_minus`` for even symbols; with
    ``divergence`` the principal symbol is derived and ``m`` is 2.
    """

    principal: PrincipalSymbol
    V: LowerOrderSymbol | None
    divergence: dict | None
    raw: dict = field(repr=False)

    def operator(self):
        from .spectral import ToroidalOperator

        if self.divergence is not None:
            return ToroidalOperator.from_divergence(
                TrigPoly.from_dict(self.divergence["a"]), float(self.divergence.get("scale", 1.0)), self.V
            )
        return ToroidalOperator.from_symbol(self.principal, self.V)


def _trig(data, what: str) -> TrigPoly:
    if not isinstance(data, dict) or not set(data) <= {"cos", "sin"}:
        raise ConfigError(f"{what} must be an object with 'cos' and/or 'sin' lists")
    try:
        return TrigPoly.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{what}: {exc}") from exc


def parse_config(data: dict) -> SymbolConfig:
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    V = None
    if "V" in data and data["V"] is not None:
        v = data["V"]
        try:
            terms = tuple(
                LowerOrderTerm(int(t["j"]), float(t["power"]), complex(float(t.get("re", 0.0)), float(t.get("im", 0.0))))
                for t in v.get("terms", [])
            )
            V = LowerOrderSymbol(float(v["kappa"]), terms)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"V: {exc}") from exc
    div = data.get("divergence")
    try:
        if div is not None:
            a = _trig(div.get("a"), "divergence.a")
            scale = float(div.get("scale", 1.0))
            b = a * (-scale)
            p = PrincipalSymbol(2.0, b, b)
        else:
            m = float(data["m"])
            if "a" in data:
                ap = am = _trig(data["a"], "a")
            else:
                ap = _trig(data["a_plus"], "a_plus")
                am = _trig(data.get("a_minus", data["a_plus"]), "a_minus")
            p = PrincipalSymbol(m, ap, am)
        if V is not None:
            V.check_order(p.m)
    except KeyError as exc:
        raise ConfigError(f"missing key {exc}") from exc
    except (TypeError, ValueError, RPCircleError) as exc:
        raise ConfigError(str(exc)) from exc
    return SymbolConfig(p, V, div, data)


def load_config(path: str) -> SymbolConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return parse_config(data)


def parse_complex(text: str) -> complex:
    """'RE,IM' or a Python complex literal such as '1j'."""
    try:
        if "," in text:
            re_, im_ = text.split(",")
            return complex(float(re_), float(im_))
        return complex(text.replace("i", "j"))
    except ValueError as exc:
        raise ConfigError(f"cannot parse complex number {text!r}") from exc


def parse_int_list(text: str) -> list:
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse integer list {text!r}") from exc
    if not vals:
        raise ConfigError("empty integer list")
    return vals


def parse_modes(text: str):
    """'ell:eps:n0..n1'."""
    try:
        ell, eps, rng = text.split(":")
        n0, n1 = rng.split("..")
        return int(ell), float(eps), range(int(n0), int(n1) + 1)
    except ValueError as exc:
        raise ConfigError(f"cannot parse modes {text!r}; expected ell:eps:n0..n1") from exc


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("CML_THREADS", "1")))
    except ValueError:
        return 1


# -- subcommands ------------------------------------------------------------------


def cmd_analyze(args, cfg: SymbolConfig, out: Path) -> int:
    from .hamflow import completeness_probe

    report = describe(cfg.principal)
    probe = completeness_probe(cfg.principal, horizon=args.horizon, tol=args.tol)
    analytic = report.completeness_verdict
    agree = probe.verdict == analytic
    payload = {"classification": report.to_dict(), "flow_probe": probe.to_dict(), "agree": agree}
    write_json(out / "report.json", payload)
    return EXIT_OK if agree else EXIT_DISAGREE


def cmd_flow(args, cfg: SymbolConfig, out: Path) -> int:
    from .hamflow import PhasePoint, integrate_flow

    x, xi = args.point
    end = args.horizon if args.direction == "forward" else -args.horizon
    tr = integrate_flow(cfg.principal, PhasePoint(x, xi), (0.0, end), tol=args.tol)
    tr.write_csv(out / "trajectory.csv")
    write_json(out / "flow.json", {
        "seed": [x, xi],
        "direction": args.direction,
        "outcome": tr.outcome.to_dict(),
        "blowup_time": tr.outcome.blowup_time,
        "energy_drift": tr.energy_drift(),
        "n_samples": int(tr.samples.shape[0]),
    })
    return EXIT_OK


def _default_source(cfg: SymbolConfig):
    from .symbols import radial_sets

    src = radial_sets(cfg.principal)["source"]
    if not src:
        raise ConfigError("symbol has no radial source")
    return src[0]


def cmd_wkb(args, cfg: SymbolConfig, out: Path) -> int:
    from . import wkb

    op = cfg.operator()
    if args.x0 is None:
        x0, sign = _default_source(cfg)
    else:
        x0, sign = args.x0, args.fiber_sign
    z = args.z if args.z is not None else 0.0
    local = wkb.local_data(op, x0, z, N=args.depth, fiber_sign=sign)
    amp = wkb.build_amplitude(local)
    amp.write_csv(out / "amplitude.csv")
    state = wkb.synthesize(amp, None, args.n_syn)
    state.write_csv(out / "wkb_coeffs.csv")
    res = {}
    for N in range(args.depth + 1):
        st = wkb.synthesize(amp, None, args.residual_n_syn, depth=N)
        try:
            res[str(N)] = wkb.residual_order(op, z, st, N, kappa=local.kappa).to_dict()
        except RPCircleError as exc:
            rep = getattr(exc, "report", None)
            res[str(N)] = {"error": str(exc), **(rep.to_dict() if rep is not None else {})}
    write_json(out / "residual.json", res)
    write_json(out / "wkb.json", {
        "local": local.to_dict(),
        "levels": [c.to_dict() for c in amp.checks],
        "phase_check": amp.phase_check.to_dict(),
        "negative_mass": state.negative_mass(),
        "sobolev": [wkb.sobolev_trend(state, s).to_dict() for s in (0.5 * (local.m - 1) - 0.1, 0.5 * (local.m - 1))],
    })
    return EXIT_OK


def cmd_spectrum(args, cfg: SymbolConfig | None, out: Path) -> int:
    from . import spectral

    payload: dict = {}
    code = EXIT_OK
    if cfg is not None:
        op = cfg.operator()
        n_list = args.n_list or [64, 128]
        z = args.z if args.z is not None else 1j
        with ThreadPoolExecutor(worker_count()) as pool:
            fut_rep = pool.submit(spectral.spectrum, op, n_list)
            fut_def = pool.submit(spectral.deficiency_probe, op, (z, z.conjugate()), args.k_max, False)
            rep, dp = fut_rep.result(), fut_def.result()
        payload["spectrum"] = rep.to_dict()
        with open(out / "eigenvalues.csv", "w") as fh:
            fh.write("N,index,value\n")
            for N in rep.N_list:
                for i, v in enumerate(rep.eigenvalues[N]):
                    fh.write(f"{N},{i},{_float_token(float(v))}\n")
        payload["deficiency"] = dp.to_dict()
        if not dp.agrees:
            code = EXIT_DISAGREE
        sols = [s for s in dp.solutions[str(complex(z))] if s.summable and np.any(s.coeffs)]
        sols = sols or dp.solutions[str(complex(z))]
        with open(out / "shooting.csv", "w") as fh:
            fh.write("k,re_u,im_u\n")
            s = sols[0]
            sign = 1 if s.direction == "positive" else -1
            for i, v in enumerate(s.coeffs):
                fh.write(f"{sign * i},{_float_token(v.real)},{_float_token(v.imag)}\n")
    if args.modes is not None:
        ell, eps, rng = args.modes
        N = (args.n_list or [32])[0]
        mats = spectral.lorentzian_modes(eps, ell, rng, N)
        wit = spectral.lorentzian_witness(eps, ell, k_max=min(args.k_max, 2048))
        payload["lorentzian"] = {
            "ell": ell, "epsilon": eps, "modes": list(rng), "N": N,
            "eigenvalue_ranges": {str(n): [float(np.min(ev)), float(np.max(ev))]
                                  for n, ev in ((n, np.linalg.eigvalsh(M.entries)) for n, M in mats.items())},
            "witness_residual": wit.residual,
            "witness_decay_exponent": wit.decay_exponent,
            "block_matches": wit.block_matches,
        }
    if not payload:
        raise ConfigError("spectrum needs --config and/or --modes")
    write_json(out / "spectrum.json", payload)
    return code


def cmd_escape(args, cfg: SymbolConfig, out: Path) -> int:
    from . import microlocal

    p = cfg.principal
    e = microlocal.build_escape(p, eps=args.eps, R=args.R)
    payload = {"escape": e.to_dict()}
    payload["estimate"] = microlocal.escape_derivative_check(p, e).to_dict()
    if p.m <= 1 and not p.is_elliptic():
        payload["mourre"] = microlocal.mourre_symbol_check(p, e).to_dict()
    microlocal.write_field_csv(out / "escape_field.csv", p, e)
    write_json(out / "escape.json", payload)
    return EXIT_OK


# -- driver -----------------------------------------------------------------------


def _positive(kind):
    def conv(text):
        try:
            v = kind(text)
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from exc
        if not v > 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return v

    return conv


def _pair(text):
    try:
        a, b = (float(v) for v in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected X,XI got {text!r}") from exc
    return a, b


def _complex_arg(text):
    try:
        return parse_complex(text)
    except ConfigError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _int_list_arg(text):
    try:
        vals = parse_int_list(text)
    except ConfigError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc
    if min(vals) < 8:
        raise argparse.ArgumentTypeError("every N must be at least 8")
    return vals


def _modes_arg(text):
    try:
        return parse_modes(text)
    except ConfigError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="symbol configuration (JSON)")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--tol", type=_positive(float), default=1e-9, help="integrator tolerance")
    common.add_argument("--horizon", type=_positive(float), default=50.0, help="flow time horizon")
    common.add_argument("--n-list", type=_int_list_arg, default=None, help="truncation sizes a,b,c")
    common.add_argument("--z", type=_complex_arg, default=None, help="spectral parameter RE,IM")
    common.add_argument("--depth", type=int, default=2, choices=range(0, 5), help="transport depth")

    parser = argparse.ArgumentParser(prog="rpcircle", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("analyze", parents=[common], help="classify a symbol and probe its flow")
    f = sub.add_parser("flow", parents=[common], help="integrate one Hamilton trajectory")
    f.add_argument("--point", type=_pair, default=(math.pi, 1.0), help="seed X,XI")
    f.add_argument("--direction", choices=("forward", "backward"), default="forward")
    w = sub.add_parser("wkb", parents=[common], help="quasimode at a radial source")
    w.add_argument("--x0", type=float, default=None)
    w.add_argument("--fiber-sign", type=int, choices=(-1, 1), default=1)
    w.add_argument("--n-syn", type=int, default=4096)
    w.add_argument("--residual-n-syn", type=int, default=128)
    s = sub.add_parser("spectrum", parents=[common], help="truncation spectra and shooting")
    s.add_argument("--modes", type=_modes_arg, default=None, help="ell:eps:n0..n1")
    s.add_argument("--k-max", type=int, default=4096)
    e = sub.add_parser("escape", parents=[common], help="escape function estimates")
    e.add_argument("--eps", type=_positive(float), default=None)
    e.add_argument("--R", type=_positive(float), default=10.0)
    return parser


COMMANDS = {
    "analyze": cmd_analyze,
    "flow": cmd_flow,
    "wkb": cmd_wkb,
    "spectrum": cmd_spectrum,
    "escape": cmd_escape,
}


def _manifest(args, argv: list, cfg: SymbolConfig | None, wall: float, code: int) -> dict:
    cfg_text = json.dumps(cfg.raw, sort_keys=True) if cfg is not None else ""
    return {
        "command": args.command,
        "argv": argv,
        "config_sha256": hashlib.sha256(cfg_text.encode()).hexdigest(),
        "versions": {
            "rpcircle": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "threads": worker_count(),
        "wall_time_s": wall,
        "exit_code": code,
    }


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        cfg = load_config(args.config) if args.config else None
        if cfg is None and not (args.command == "spectrum" and getattr(args, "modes", None)):
            raise ConfigError("--config is required")
        if args.command == "wkb" and args.n_syn < 64:
            raise ConfigError("--n-syn must be at least 64")
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
    except ConfigError as exc:
        print(f"rpcircle: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    t0 = time.perf_counter()
    try:
        code = COMMANDS[args.command](args, cfg, out)
    except ConfigError as exc:
        print(f"rpcircle: error: {exc}", file=sys.stderr)
        code = EXIT_INPUT
    except RPCircleError as exc:
        print(f"rpcircle: {type(exc).__name__}: {exc}", file=sys.stderr)
        code = EXIT_MODULE
    write_json(out / "manifest.json", _manifest(args, argv, cfg, time.perf_counter() - t0, code))
    return code


if __name__ == "__main__":
    sys.exit(main())
