"""Command-line front end.

Subcommands ``factor``, ``analyze``, ``verify``, ``rates`` and ``pencil``.
Machine-readable output (JSON, CSV) goes to files or standard output;
progress and summaries go to standard error.

Exit codes: 0 converged or verified, 1 usage or input error, 2 stalled or
iteration cap reached (factors are still written), 3 indefinite breakdown,
4 not representable in exact arithmetic.
"""
import argparse
import json
import sys
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import corpus
from . import diagnostics as dg
from . import matpoly as mp
from . import nme
from . import surd as sd
from .errors import (
    InconsistentBlocks,
    InsufficientData,
    MsfError,
    NotRepresentable,
    NoRealFactorization,
)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_STALLED = 2
EXIT_BREAKDOWN = 3
EXIT_NOT_REPRESENTABLE = 4

_STATUS_EXIT = {
    nme.CONVERGED: EXIT_OK,
    nme.STALLED: EXIT_STALLED,
    nme.MAX_ITERATIONS: EXIT_STALLED,
    nme.BREAKDOWN: EXIT_BREAKDOWN,
}

TRACE_HEADER = "n,eps_P,eps_H,step_norm"
NEWTON_PATIENCE = 20


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad flags; 2 means "stalled" here
    def error(self, message):
        raise UsageError(message)


def _log(msg):
    print(msg, file=sys.stderr)


def _fmt(x):
    return "" if x is None else "%.17g" % x


def _finite_or_none(x):
    if x is None:
        return None
    x = float(x)
    return x if np.isfinite(x) else None


@dataclass
class RunReport:
    """Summary of one solver run, serialized as JSON."""

    label: str
    method: str
    status: str
    iterations: int
    final_eps_P: Optional[float]
    final_eps_H: Optional[float]
    rate: Optional[dict]
    factors: list
    singularity: Optional[dict]
    final_eps_X: Optional[float] = None
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, obj):
        return cls(**obj)

    def dump(self, fh):
        json.dump(self.to_dict(), fh, indent=2)
        fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def write_trace_csv(trace, fh):
    """Write ``n,eps_P,eps_H,step_norm`` rows at full precision."""
    fh.write(TRACE_HEADER + "\n")
    for i in range(len(trace)):
        eh = None if trace.eps_H is None else float(trace.eps_H[i])
        fh.write("%d,%s,%s,%s\n" % (
            int(trace.n[i]), _fmt(float(trace.eps_P[i])), _fmt(eh), _fmt(float(trace.step_norm[i]))))


def _open_out(path):
    if path is None or path == "-":
        return sys.stdout, False
    return open(path, "w"), True


def _emit_json(obj, path):
    fh, close = _open_out(path)
    try:
        json.dump(obj, fh, indent=2)
        fh.write("\n")
    finally:
        if close:
            fh.close()


def _emit_trace(trace, path):
    if path is None:
        return
    fh, close = _open_out(path)
    try:
        write_trace_csv(trace, fh)
    finally:
        if close:
            fh.close()


def _load_problem(args):
    """``(label, MatLaurentPoly, CorpusEntry or None)`` from ``--input``/``--example``."""
    if getattr(args, "example", None) is not None:
        entry = corpus.get(args.example)
        return entry.label, entry.poly(), entry
    if getattr(args, "input", None) is None:
        raise UsageError("one of --input or --example is required")
    try:
        P = mp.MatLaurentPoly.load(args.input)
    except OSError as exc:
        raise UsageError(f"cannot read {args.input}: {exc}") from None
    except (ValueError, json.JSONDecodeError) as exc:
        raise UsageError(f"malformed polynomial file {args.input}: {exc}") from None
    return args.input, P, None


def _extract(result, m, r):
    """``H_0 .. H_m`` from an embedded result; copies are averaged."""
    try:
        return mp.block_extract(result.H0, result.H1, m, r), None
    except InconsistentBlocks as exc:
        # a stalled iterate is not exactly block Toeplitz; keep the average
        hs = mp.block_extract(result.H0, result.H1, m, r, extract_tol=np.inf)
        return hs, exc.max_discrepancy


def _rate_dict(errors, burn_in=0):
    if errors is None or len(errors) == 0:
        return None
    try:
        return dg.estimate_rate(errors, burn_in=burn_in).to_dict()
    except InsufficientData as exc:
        return {"class": None, "reason": str(exc)}


def _singularity(P, prob, X):
    """Verdict from determinant zeros; closed-loop numbers at the returned iterate.

    At a stalled iterate of a singular problem the closed-loop spectrum sits
    just inside the circle, so only the determinant decides.
    """
    out = {"is_singular": None, "circle_zeros": [], "closed_loop": None}
    try:
        rep = mp.circle_zeros(mp.det_poly(P))
        out["is_singular"] = rep.is_singular
        out["circle_zeros"] = [
            {"re": z.location.real, "im": z.location.imag, "multiplicity": z.multiplicity}
            for z in rep.on_circle_zeros()
        ]
    except MsfError:
        pass
    if np.all(np.isfinite(X)):
        try:
            out["closed_loop"] = dg.classify_singularity(prob, X)
        except MsfError:
            pass
    return out


def cmd_factor(args):
    label, P, entry = _load_problem(args)
    if P.m < 1:
        raise UsageError("polynomial must have degree m >= 1")
    prob = nme.NmeProblem.from_poly(P, label)
    cfg = nme.SolverConfig(
        tol_residual=args.tol,
        max_iter=args.max_iter,
        reference_H0=entry.reference_H0() if entry is not None else None,
        reference_X=entry.reference_X() if entry is not None else None,
        stall_patience=NEWTON_PATIENCE if args.method == "newton" else 0,
        log_trace=True,
    )
    if args.method == "fpi":
        res = nme.fpi_solve(prob, cfg)
    else:
        res = nme.newton_solve(prob, cfg)
    hs, disc = _extract(res, P.m, P.r)
    final_P = _finite_or_none(nme.metric_eps_P(res.H0, res.H1, prob))
    final_H = final_X = None
    if entry is not None:
        final_H = _finite_or_none(nme.metric_eps_H(res.H0, cfg.reference_H0))
        final_X = _finite_or_none(np.linalg.norm(res.X - cfg.reference_X, 2))
    tr = res.trace
    rate = _rate_dict(tr.eps_H if tr.eps_H is not None else tr.eps_P)
    extra = {"n_best": res.extra.get("n_best"), "breakdown_at": res.extra.get("breakdown_at")}
    if disc is not None:
        extra["block_discrepancy"] = disc
    report = RunReport(
        label=label, method=args.method, status=res.status, iterations=int(res.iterations),
        final_eps_P=final_P, final_eps_H=final_H, rate=rate,
        factors=[h.tolist() for h in hs], singularity=_singularity(P, prob, res.X),
        final_eps_X=final_X, extra=extra,
    )
    _emit_json(report.to_dict(), args.out)
    _emit_trace(tr, args.trace)
    _log(f"{label}: {args.method} {res.status} after {res.iterations} iterations, "
         f"eps_P={_fmt(final_P)} eps_H={_fmt(final_H)}")
    return _STATUS_EXIT[res.status]


def cmd_analyze(args):
    label, P, _ = _load_problem(args)
    if not mp.is_para_hermitian(P):
        _log(f"{label}: not para-Hermitian")
        return EXIT_INPUT
    psd = mp.psd_on_circle(P, samples=args.samples)
    q = mp.det_poly(P)
    zeros = []
    report = None
    if q.coeffs:
        report = mp.circle_zeros(q)
        for z in report.zeros:
            zeros.append({"re": z.location.real, "im": z.location.imag,
                          "multiplicity": z.multiplicity, "on_circle": z.on_circle})
    existence = None
    if P.m >= 1:
        try:
            existence = nme.existence_conditions(nme.NmeProblem.from_poly(P, label))
        except MsfError as exc:
            existence = {"error": str(exc)}
    on = [z for z in zeros if z["on_circle"]]
    out = {
        "label": label,
        "r": P.r,
        "m": P.m,
        "para_hermitian": True,
        "psd": psd,
        "det_coeffs": {str(k): v for k, v in sorted(q.coeffs.items())},
        "zeros": zeros,
        "existence": existence,
        "singular": bool(report is not None and report.is_singular),
    }
    _emit_json(out, args.out)
    desc = ", ".join(f"{z['re']:+.6g}{z['im']:+.6g}i x{z['multiplicity']}" for z in on)
    _log(f"{label}: min eig on circle {psd['min_eig']:.3e}; "
         + (f"unit-circle zeros {desc}" if on else "no unit-circle zeros"))
    return EXIT_OK


def _verify_inputs(args):
    if args.example is not None:
        entry = corpus.get(args.example)
        P0, P1, X, H0, H1 = entry.exact_embedded()
        return entry.label, P0, P1, X, H0, H1, entry.P_exact
    if args.input is None:
        raise UsageError("one of --input or --example is required")
    try:
        with open(args.input) as fh:
            obj = json.load(fh)
        P, X, H = corpus.exact_from_surd_text(obj)
    except OSError as exc:
        raise UsageError(f"cannot read {args.input}: {exc}") from None
    except (ValueError, KeyError, TypeError, AttributeError) as exc:
        raise UsageError(f"malformed surd file {args.input}: {exc}") from None
    if X is None or H is None:
        raise UsageError("surd file must provide P, X and H")
    if P.m < 1 or len(H) != P.m + 1:
        raise UsageError(f"need H_0..H_m for degree m = {P.m}")
    P0, P1 = P.block_embed()
    H0, H1 = corpus.exact_embed_factors(H)
    return args.input, P0, P1, X, H0, H1, P


def cmd_verify(args):
    label, P0, P1, X, H0, H1, P = _verify_inputs(args)
    try:
        flags = sd.exact_verify((P0, P1), X, H0, H1)
        if P0.shape == (1, 1):
            sol = sd.exact_scalar_solve(P0[0, 0], P1[0, 0])
            flags["scalar_x_ok"] = sol["x"] == X[0, 0]
            flags["scalar_h_ok"] = sol["h0"] == H0[0, 0] and sol["h1"] == H1[0, 0]
    except NotRepresentable as exc:
        _log(f"{label}: not representable in the surd field: {exc}")
        return EXIT_NOT_REPRESENTABLE
    except NoRealFactorization as exc:
        _log(f"{label}: {exc}")
        return EXIT_INPUT
    flags = {k: bool(v) for k, v in flags.items()}
    _emit_json({"label": label, "flags": flags, "all_ok": all(flags.values())}, args.out)
    for k, v in flags.items():
        _log(f"{label}: {k} {'exact' if v else 'FAILED'}")
    return EXIT_OK if all(flags.values()) else EXIT_INPUT


def _expected(entry, method, X_ref, prob):
    if method == "newton":
        if entry.singular:
            return {"class": dg.LINEAR, "factor": entry.expected_newton_factor}
        return {"class": dg.QUADRATIC, "factor": None}
    if entry.singular:
        return {"class": dg.SUBLINEAR, "power": 1.0}
    rho = dg.clustered_spectral_radius(dg.closed_loop(X_ref, prob.P1))
    return {"class": dg.LINEAR, "factor": rho**2}


def cmd_rates(args):
    if args.example is None:
        raise UsageError("--example is required (a reference solution is needed)")
    entry = corpus.get(args.example)
    if entry.known_X is None:
        _log(f"{entry.label}: no reference solution")
        return EXIT_INPUT
    prob = entry.problem()
    cfg = nme.SolverConfig(
        tol_residual=0.0, tol_step=0.0, max_iter=args.iters,
        reference_H0=entry.reference_H0(), reference_X=entry.reference_X(),
        stall_patience=NEWTON_PATIENCE if args.method == "newton" else 0,
        log_trace=args.method == "fpi" and args.iters > 10**5,
    )
    res = nme.fpi_solve(prob, cfg) if args.method == "fpi" else nme.newton_solve(prob, cfg)
    tr = res.trace
    try:
        est = dg.estimate_rate(tr.eps_H, burn_in=args.burn_in, n=tr.n)
    except InsufficientData as exc:
        _log(f"{entry.label}: {exc}")
        return EXIT_INPUT
    out = {
        "label": entry.label,
        "method": args.method,
        "status": res.status,
        "iterations": int(res.iterations),
        "rate": est.to_dict(),
        "expected": _expected(entry, args.method, cfg.reference_X, prob),
    }
    _emit_json(out, args.out)
    _emit_trace(tr, args.trace)
    _log(f"{entry.label}: {args.method} rate {est.kind} factor={est.factor} power={est.power}")
    return EXIT_OK


def cmd_pencil(args):
    entry = corpus.get(args.example)
    prob = entry.problem()
    X = entry.reference_X()
    pencil = dg.gdare_pencil(prob)
    lam = dg.pencil_eigenvalues(pencil)
    points, pattern = dg.pencil_unit_circle_report(prob, X)
    out = {
        "label": entry.label,
        "M": pencil.M.tolist(),
        "N": pencil.N.tolist(),
        "pencil_eigenvalues": [{"re": float(z.real), "im": float(z.imag)} for z in lam],
        "points": points,
        "pattern": pattern,
    }
    _emit_json(out, args.out)
    _log(f"{entry.label}: closed-loop eigenvalues {pattern}")
    return EXIT_OK


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def build_parser():
    p = _Parser(prog="msfactor", description="Spectral factorization of para-Hermitian matrix polynomials.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    def source(sp, required=True):
        g = sp.add_mutually_exclusive_group(required=required)
        g.add_argument("--input", help="JSON polynomial file")
        g.add_argument("--example", type=int, help="corpus id 1..7")

    f = sub.add_parser("factor", help="solve for the spectral factor")
    source(f)
    f.add_argument("--method", choices=("fpi", "newton"), default="newton")
    f.add_argument("--tol", type=float, default=None, help="residual tolerance")
    f.add_argument("--max-iter", type=_positive_int, default=None)
    f.add_argument("--trace", help="trace CSV path ('-' for stdout)")
    f.add_argument("--out", help="RunReport JSON path (default stdout)")
    f.set_defaults(func=cmd_factor)

    a = sub.add_parser("analyze", help="structure, positivity and determinant zeros")
    source(a)
    a.add_argument("--samples", type=_positive_int, default=None)
    a.add_argument("--out")
    a.set_defaults(func=cmd_analyze)

    v = sub.add_parser("verify", help="exact identity check")
    g = v.add_mutually_exclusive_group(required=True)
    g.add_argument("--input", help="surd text JSON with P, X, H")
    g.add_argument("--example", type=int)
    v.add_argument("--out")
    v.set_defaults(func=cmd_verify)

    r = sub.add_parser("rates", help="convergence-rate measurement against the known solution")
    r.add_argument("--example", type=int, required=True)
    r.add_argument("--method", choices=("fpi", "newton"), default="fpi")
    r.add_argument("--iters", type=_positive_int, default=10000)
    r.add_argument("--burn-in", type=int, default=0)
    r.add_argument("--trace")
    r.add_argument("--out")
    r.set_defaults(func=cmd_rates)

    c = sub.add_parser("pencil", help="Riccati pencil and closed-loop eigenvalues")
    c.add_argument("--example", type=int, required=True)
    c.add_argument("--out")
    c.set_defaults(func=cmd_pencil)
    return p


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        _log(f"msfactor: {exc}")
        return EXIT_INPUT
    except (MsfError, ValueError) as exc:
        _log(f"msfactor: {type(exc).__name__}: {exc}")
        return EXIT_INPUT
    except OSError as exc:
        _log(f"msfactor: {exc}")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
