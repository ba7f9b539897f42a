"""Built-in test problems with exact closed-form spectral factors.

Seven para-Hermitian polynomials: one nonsingular degree-two matrix
example, the scalar Haar product filter and five singular matrix product
filters from multiwavelet design. Coefficients are exact surds; float
views are derived on demand.
"""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import surd as sd
from .errors import UnknownId
from .matpoly import embed_factors
from .nme import NmeProblem
from .surd import ExactLaurentPoly, SurdMatrix


def _m(rows, scale=None):
    return SurdMatrix.parse(rows, scale)


@dataclass
class CorpusEntry:
    """One corpus problem.

    ``known_X`` is the solution of the (block-embedded when ``m > 1``)
    equation and ``known_H`` lists ``H_0 .. H_m``. ``zeros`` maps each
    unit-circle determinant zero to its multiplicity and ``newton_p`` is the
    Jordan chain length that sets Newton's factor ``2**(-1/p)``.
    """

    id: int
    label: str
    P_exact: ExactLaurentPoly
    known_X: Optional[SurdMatrix]
    known_H: Optional[list]
    singular: bool
    circle_zero_multiplicity: int
    zeros: dict = field(default_factory=dict)
    newton_p: Optional[int] = None
    notes: str = ""
    variants: dict = field(default_factory=dict)

    @property
    def expected_newton_factor(self):
        return None if self.newton_p is None else 2.0 ** (-1.0 / self.newton_p)

    @property
    def m(self):
        return self.P_exact.m

    @property
    def r(self):
        return self.P_exact.r

    def poly(self):
        """Float :class:`MatLaurentPoly`."""
        return self.P_exact.to_float()

    def problem(self):
        """Float (block-embedded) :class:`NmeProblem`."""
        P0, P1 = self.P_exact.block_embed()
        return NmeProblem(P0.to_float(), P1.to_float(), f"example {self.id}")

    def exact_embedded(self):
        """Exact ``(P0_hat, P1_hat, X_hat, H0_hat, H1_hat)``."""
        P0, P1 = self.P_exact.block_embed()
        H0, H1 = self.exact_embedded_factors()
        return P0, P1, self.known_X, H0, H1

    def exact_embedded_factors(self):
        return exact_embed_factors(self.known_H)

    def reference_X(self):
        return self.known_X.to_float()

    def reference_H0(self):
        return embed_factors([h.to_float() for h in self.known_H])[0]

    def reference_H(self):
        return [h.to_float() for h in self.known_H]

    def summary(self):
        return {
            "id": self.id,
            "label": self.label,
            "r": self.r,
            "m": self.m,
            "singular": self.singular,
            "circle_zero_multiplicity": self.circle_zero_multiplicity,
            "expected_newton_factor": self.expected_newton_factor,
        }

    def to_surd_text(self):
        """Exact data in the surd text format (JSON-serializable)."""
        return {
            "id": self.id,
            "P": self.P_exact.to_text(),
            "X": self.known_X.to_text() if self.known_X is not None else None,
            "H": [h.to_text() for h in self.known_H] if self.known_H else None,
        }

    def to_json_poly(self):
        """Float polynomial in the JSON polynomial format."""
        return self.poly().to_json_dict()


def exact_embed_factors(hs):
    """Exact embedded ``(H0_hat, H1_hat)`` from ``H_0 .. H_m`` (surd matrices)."""
    m = len(hs) - 1
    if m == 1:
        return hs[0], hs[1]
    r = hs[0].rows
    z = sd.ZERO
    H0 = [[z] * (m * r) for _ in range(m * r)]
    H1 = [[z] * (m * r) for _ in range(m * r)]
    for i in range(m):
        for j in range(m):
            for a in range(r):
                for b in range(r):
                    if i >= j:
                        H0[i * r + a][j * r + b] = hs[i - j][a, b]
                    if j >= i:
                        H1[i * r + a][j * r + b] = hs[m - (j - i)][a, b]
    return SurdMatrix(H0), SurdMatrix(H1)


def exact_from_surd_text(obj):
    """Inverse of :meth:`CorpusEntry.to_surd_text`: ``(P, X, H)``."""
    P = ExactLaurentPoly({int(k): _m(v) for k, v in obj["P"].items()})
    X = _m(obj["X"]) if obj.get("X") is not None else None
    H = [_m(h) for h in obj["H"]] if obj.get("H") is not None else None
    return P, X, H


def _scalar(p0, p1):
    p0 = sd.parse(p0)
    p1 = sd.parse(p1)
    sol = sd.exact_scalar_solve(p0, p1)
    P = ExactLaurentPoly.from_one_sided([SurdMatrix([[p0]]), SurdMatrix([[p1]])])
    return P, SurdMatrix([[sol["x"]]]), [SurdMatrix([[sol["h0"]]]), SurdMatrix([[sol["h1"]]])]


def _build():
    out = {}

    # 1: nonsingular, m = 2, r = 2; zeros of the determinant at 1/2 and 2
    inv_s34 = sd.parse("s34/34")
    H1s = [
        _m([["4", "0"], ["1", "17"]], inv_s34),
        _m([["-1", "1"], ["0", "-4"]], inv_s34),
        _m([["0", "4"], ["0", "0"]], inv_s34),
    ]
    P = ExactLaurentPoly.from_one_sided([
        _m([["1", "0"], ["0", "9"]]),
        _m([["0", "0"], ["0", "-2"]]),
        _m([["0", "0"], ["2", "0"]]),
    ])
    Xh = _m([["8", "2", "-2", "0"], ["2", "145", "8", "-34"],
             ["-2", "8", "9", "0"], ["0", "-34", "0", "153"]], "1/17")
    out[1] = CorpusEntry(1, "Kucera degree-two example", P, Xh, H1s, False, 0,
                         zeros={}, newton_p=None,
                         notes="determinant zeros at 1/2 and 2; solution stored block-embedded (4x4)")

    # 2: scalar Haar product filter z^-1 + 2 + z
    P, X, H = _scalar("2", "1")
    Pn, Xn, Hn = _scalar("1", "1/2")
    out[2] = CorpusEntry(2, "Haar product filter (scalar)", P, X, H, True, 2,
                         zeros={-1: 2}, newton_p=1,
                         notes="double zero at z = -1; normalized variant p0 = 1, p1 = 1/2",
                         variants={"haar": (P, X, H), "normalized": (Pn, Xn, Hn)})

    # 3: double zeros at +1 and -1, integer factor
    H3 = [_m([["1", "0"], ["5", "1"]]), _m([["2", "1"], ["7", "3"]])]
    P = ExactLaurentPoly.from_one_sided([
        _m([["6", "22"], ["22", "84"]]), _m([["2", "7"], ["11", "38"]])])
    out[3] = CorpusEntry(3, "integer 2x2 example with zeros at +1 and -1", P,
                         _m([["1", "5"], ["5", "26"]]), H3, True, 2,
                         zeros={-1: 2, 1: 2}, newton_p=1,
                         notes="two double zeros on the circle")

    # 4: integer multiwavelet (Cheung-type), quadruple zero at -1
    H4 = [_m([["s2", "0"], ["-1", "1"]], "1/2"), _m([["s2", "0"], ["1", "1"]], "1/2")]
    P = ExactLaurentPoly.from_one_sided([
        SurdMatrix.identity(2), _m([["2", "s2"], ["-s2", "0"]], "1/4")])
    out[4] = CorpusEntry(4, "integer multiwavelet product filter", P,
                         _m([["2", "-s2"], ["-s2", "2"]], "1/4"), H4, True, 4,
                         zeros={-1: 4}, newton_p=2,
                         notes="dyadic filters after left-multiplying by diag(sqrt2, 1)")

    # 5: Chui-Lian product filter
    H5 = [_m([["4", "0"], ["s7+1", "s7-1"]], "s2/8"),
          _m([["4", "0"], ["-(s7+1)", "s7-1"]], "s2/8")]
    P = ExactLaurentPoly.from_one_sided([
        SurdMatrix.identity(2), _m([["4", "-(1+s7)"], ["1+s7", "-s7"]], "1/8")])
    out[5] = CorpusEntry(5, "Chui-Lian product filter", P,
                         _m([["4", "s7+1"], ["s7+1", "4"]], "1/8"), H5, True, 4,
                         zeros={-1: 4}, newton_p=2, notes="quadruple zero at -1")

    # 6: supercompact multiwavelet
    H6 = [_m([["2", "0"], ["s3", "1"]], "s2/4"), _m([["2", "0"], ["-s3", "1"]], "s2/4")]
    P = ExactLaurentPoly.from_one_sided([
        SurdMatrix.identity(2), _m([["2", "-s3"], ["s3", "-1"]], "1/4")])
    out[6] = CorpusEntry(6, "supercompact multiwavelet product filter", P,
                         _m([["2", "s3"], ["s3", "2"]], "1/4"), H6, True, 4,
                         zeros={-1: 4}, newton_p=2, notes="quadruple zero at -1")

    # 7: Legendre multiscaling function of order 5
    H7 = [
        _m([["16", "0", "0", "0", "0"],
            ["-8s3", "8", "0", "0", "0"],
            ["0", "-4s15", "4", "0", "0"],
            ["2s7", "2s21", "-2s35", "2", "0"],
            ["0", "2s3", "6s5", "3s7", "1"]], "s2/32"),
        _m([["16", "0", "0", "0", "0"],
            ["8s3", "8", "0", "0", "0"],
            ["0", "4s15", "4", "0", "0"],
            ["-2s7", "2s21", "2s35", "2", "0"],
            ["0", "-2s3", "6s5", "-3s7", "1"]], "s2/32"),
    ]
    P1 = _m([["128", "64s3", "0", "-16s7", "0"],
             ["-64s3", "-64", "16s15", "16s21", "-8s3"],
             ["0", "-16s15", "-112", "-8s35", "24s5"],
             ["16s7", "16s21", "8s35", "-40", "-39s7"],
             ["0", "8s3", "24s5", "39s7", "53"]], "1/256")
    X7 = _m([["128", "-64s3", "0", "16s7", "0"],
             ["-64s3", "128", "-16s15", "0", "8s3"],
             ["0", "-16s15", "128", "-16s35", "0"],
             ["16s7", "0", "-16s35", "128", "-21s7"],
             ["0", "8s3", "0", "-21s7", "128"]], "1/256")
    P = ExactLaurentPoly.from_one_sided([SurdMatrix.identity(5), P1])
    out[7] = CorpusEntry(7, "Legendre multiscaling function of order 5", P, X7, H7, True, 10,
                         zeros={-1: 10}, newton_p=5, notes="tenfold zero at -1")
    return out


_CORPUS = None

_COMPLETIONS = {
    4: ([["0", "s2"], ["1", "1"]], [["0", "-s2"], ["-1", "1"]], "1/2"),
    5: ([["0", "4"], ["s7-1", "-s7-1"]], [["0", "-4"], ["-s7+1", "-s7-1"]], "s2/8"),
}


def _corpus():
    global _CORPUS
    if _CORPUS is None:
        _CORPUS = _build()
    return _CORPUS


def get(id, variant=None):
    """Corpus entry ``id`` (1..7).

    For ``id = 2`` the ``"normalized"`` variant (``p0 = 1``, ``p1 = 1/2``)
    can be selected; the default is the Haar normalization ``p0 = 2``.
    """
    try:
        entry = _corpus()[int(id)]
    except (KeyError, ValueError, TypeError):
        raise UnknownId(f"no corpus entry {id!r}; valid ids are 1..7") from None
    if variant is None:
        return entry
    if variant not in entry.variants:
        raise UnknownId(f"entry {id} has no variant {variant!r}")
    P, X, H = entry.variants[variant]
    return CorpusEntry(entry.id, f"{entry.label} [{variant}]", P, X, H, entry.singular,
                       entry.circle_zero_multiplicity, dict(entry.zeros), entry.newton_p,
                       entry.notes, dict(entry.variants))


def list_entries():
    return [e.summary() for e in _corpus().values()]


def ids():
    return sorted(_corpus())


def wavelet_completion(id):
    """Exact wavelet filters ``(G0, G1)`` completing the factor of entry 4 or 5."""
    if id not in _COMPLETIONS:
        raise UnknownId(f"no wavelet completion recorded for entry {id!r}")
    g0, g1, scale = _COMPLETIONS[id]
    return _m(g0, scale), _m(g1, scale)


def completion_identities(id):
    """Exact polyphase orthogonality of ``[H; G]`` for entry 4 or 5.

    Returns flags for ``H0 H0^T + H1 H1^T = I``, ``G0 G0^T + G1 G1^T = I`` and
    ``H0 G0^T + H1 G1^T = 0``.
    """
    G0, G1 = wavelet_completion(id)
    H0, H1 = get(id).known_H
    I = SurdMatrix.identity(H0.rows)
    return {
        "hh_ok": (H0 @ H0.T + H1 @ H1.T - I).is_zero(),
        "gg_ok": (G0 @ G0.T + G1 @ G1.T - I).is_zero(),
        "hg_ok": (H0 @ G0.T + H1 @ G1.T).is_zero(),
    }


def dyadic_view():
    """Entry 4's factor left-multiplied by ``diag(sqrt2, 1)`` (dyadic coefficients)."""
    D = _m([["s2", "0"], ["0", "1"]])
    H0, H1 = get(4).known_H
    return D @ H0, D @ H1
