"""Matrix Laurent polynomials ``P(z) = sum_k P_k z^k``.

Covers para-Hermitian structure, evaluation on the unit circle, the block
embedding that reduces degree ``m`` to degree one, determinant
interpolation and the location and multiplicity of determinant zeros.

Sign convention: ``H(z) = sum_{j>=0} H_j z^{-j}`` is stored with
coefficients at keys ``-j``, so ``P = H H^*`` has ``P_k = sum_j H_j H_{j+k}^T``
and in particular ``P_1 = H_0 H_1^T`` for degree one.
"""
from dataclasses import dataclass, field
import json

import mpmath
import numpy as np

from . import densecore as dc
from .errors import (
    DegenerateInput,
    DimensionMismatch,
    InconsistentBlocks,
    NotParaHermitian,
    ZeroArgument,
)

CIRCLE_TOL = 1e-6
# Rounding the coefficients to double splits a p-fold zero into a ring of
# radius about (eps * cond)**(1/p): 1e-4 for a fourfold zero, 0.09 (spacing
# 0.065) for a tenfold one. Single linkage at 0.1 keeps such rings together.
CLUSTER_TOL = 1e-1
INTERP_TOL = 1e-10
MP_DPS = 40
EXTRACT_TOL = 1e-8


class MatLaurentPoly:
    """Matrix Laurent polynomial with ``r x r`` coefficients.

    Parameters
    ----------
    coeffs : mapping int -> array_like
        Coefficient matrices keyed by power of ``z``. Missing keys are zero.
    r : int, optional
        Coefficient size, inferred from the first coefficient if omitted.
    """

    def __init__(self, coeffs, r=None):
        cs = {}
        for k, c in dict(coeffs).items():
            a = dc.as_matrix(c, f"coefficient {k}")
            if r is None:
                r = a.shape[0]
            if a.shape != (r, r):
                raise DimensionMismatch(f"coefficient {k} has shape {a.shape}, expected {(r, r)}")
            cs[int(k)] = a.copy()
        if r is None:
            raise ValueError("cannot infer coefficient size of an empty polynomial")
        self.r = int(r)
        self.coeffs = cs

    @property
    def m(self):
        """Degree: largest ``|k|`` with a stored coefficient."""
        return max((abs(k) for k in self.coeffs), default=0)

    @property
    def kmin(self):
        return min(self.coeffs, default=0)

    @property
    def kmax(self):
        return max(self.coeffs, default=0)

    def coeff(self, k):
        c = self.coeffs.get(k)
        return c if c is not None else np.zeros((self.r, self.r))

    def __repr__(self):
        return f"MatLaurentPoly(r={self.r}, keys={sorted(self.coeffs)})"

    @classmethod
    def from_one_sided(cls, hs):
        """Build ``H(z) = sum_j hs[j] z^{-j}``."""
        return cls({-j: h for j, h in enumerate(hs)})

    def to_json_dict(self):
        return {
            "r": self.r,
            "m": self.m,
            "coeffs": {str(k): self.coeffs[k].tolist() for k in sorted(self.coeffs)},
        }

    @classmethod
    def from_json_dict(cls, obj):
        """Load the JSON polynomial format; ``mirror: true`` fills ``P_{-k} = P_k^T``."""
        try:
            r = int(obj["r"])
            raw = {int(k): np.asarray(v, dtype=float) for k, v in obj["coeffs"].items()}
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed polynomial object: {exc}") from exc
        if obj.get("mirror", False):
            for k in list(raw):
                if k > 0 and -k not in raw:
                    raw[-k] = raw[k].T
                elif k < 0 and -k not in raw:
                    raw[-k] = raw[k].T
        poly = cls(raw, r=r)
        if "m" in obj and int(obj["m"]) < poly.m:
            raise ValueError(f"declared degree {obj['m']} is smaller than stored degree {poly.m}")
        return poly

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))

    def dump(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)


@dataclass
class ScalarLaurentPoly:
    """Scalar Laurent polynomial; ``coeffs[k]`` multiplies ``z^k``."""

    coeffs: dict

    @property
    def kmin(self):
        return min(self.coeffs, default=0)

    @property
    def kmax(self):
        return max(self.coeffs, default=0)

    @property
    def m(self):
        return max((abs(k) for k in self.coeffs), default=0)

    def __call__(self, z):
        return sum(c * z**k for k, c in self.coeffs.items())

    def ordinary(self):
        """Coefficients (highest power first) of ``z^{-kmin} q(z)``."""
        if not self.coeffs:
            return np.zeros(1)
        lo, hi = self.kmin, self.kmax
        return np.array([self.coeffs.get(k, 0.0) for k in range(hi, lo - 1, -1)])


@dataclass
class CircleZero:
    location: complex
    multiplicity: int
    on_circle: bool


@dataclass
class CircleZeroReport:
    zeros: list = field(default_factory=list)
    is_singular: bool = False

    def on_circle_zeros(self):
        return [z for z in self.zeros if z.on_circle]


def para_conjugate(P):
    return MatLaurentPoly({-k: c.T for k, c in P.coeffs.items()}, r=P.r)


def is_para_hermitian(P, tol=1e-12):
    keys = set(P.coeffs) | {-k for k in P.coeffs}
    worst = 0.0
    for k in keys:
        worst = max(worst, dc.norm_fro(P.coeff(-k) - P.coeff(k).T))
    return worst <= tol


def evaluate(P, z):
    """``P(z)`` as a complex ndarray (real and imaginary parts are the pair)."""
    z = complex(z)
    if z == 0:
        raise ZeroArgument("Laurent polynomial evaluated at z = 0")
    lo, hi = P.kmin, P.kmax
    acc = np.zeros((P.r, P.r), dtype=complex)
    # Horner in z over the shifted polynomial z^{-lo} P(z), then rescale.
    for k in range(hi, lo - 1, -1):
        acc = acc * z + P.coeff(k)
    return acc * z**lo


def psd_on_circle(P, samples=None, tol=1e-10):
    """Smallest eigenvalue of the Hermitian ``P(e^{i theta})`` on a uniform grid.

    Returns a dict with ``ok`` (``min_eig >= -tol``), ``min_eig`` and
    ``argmin_angle``.
    """
    if not is_para_hermitian(P):
        raise NotParaHermitian("positivity on the circle needs a para-Hermitian polynomial")
    m = P.m
    if samples is None:
        samples = max(256, 8 * m + 1)
    if samples < 4 * m + 1:
        raise ValueError(f"need at least {4 * m + 1} samples, got {samples}")
    # include theta = pi exactly so zeros at z = -1 are sampled
    if samples % 2:
        samples += 1
    thetas = 2 * np.pi * np.arange(samples) / samples
    best, best_theta = np.inf, 0.0
    for th in thetas:
        val = evaluate(P, np.exp(1j * th))
        val = 0.5 * (val + val.conj().T)
        lam = np.linalg.eigvalsh(val)[0]
        if lam < best:
            best, best_theta = float(lam), float(th)
    return {"ok": best >= -tol, "min_eig": best, "argmin_angle": best_theta}


def block_embed(P):
    """Degree-one block coefficients ``(P0_hat, P1_hat)`` of size ``m r``.

    ``P0_hat`` has block ``(i, j) = P_{j-i}`` and ``P1_hat`` has block
    ``(i, j) = P_{m+j-i}`` for ``m + j - i <= m``, zero otherwise.
    """
    if not is_para_hermitian(P):
        raise NotParaHermitian("block embedding needs a para-Hermitian polynomial")
    m, r = P.m, P.r
    if m < 1:
        raise ValueError("block embedding needs degree m >= 1")
    if m == 1:
        return P.coeff(0).copy(), P.coeff(1).copy()
    P0h = np.zeros((m * r, m * r))
    P1h = np.zeros((m * r, m * r))
    for i in range(m):
        for j in range(m):
            P0h[i * r:(i + 1) * r, j * r:(j + 1) * r] = P.coeff(j - i)
            k = m + j - i
            if k <= m:
                P1h[i * r:(i + 1) * r, j * r:(j + 1) * r] = P.coeff(k)
    return dc.symmetrize(P0h), P1h


def embed_factors(hs):
    """Inverse of :func:`block_extract`: assemble ``(H0_hat, H1_hat)`` from ``H_0..H_m``."""
    m = len(hs) - 1
    r = hs[0].shape[0]
    if m == 1:
        return hs[0].copy(), hs[1].copy()
    H0h = np.zeros((m * r, m * r))
    H1h = np.zeros((m * r, m * r))
    for i in range(m):
        for j in range(m):
            if i >= j:
                H0h[i * r:(i + 1) * r, j * r:(j + 1) * r] = hs[i - j]
            if j >= i:
                H1h[i * r:(i + 1) * r, j * r:(j + 1) * r] = hs[m - (j - i)]
    return H0h, H1h


def block_extract(H0_hat, H1_hat, m, r, extract_tol=EXTRACT_TOL):
    """Recover ``[H_0, ..., H_m]`` from the embedded factors.

    Repeated copies of each block are averaged. Raises
    :class:`InconsistentBlocks` when copies (or the blocks that must vanish)
    disagree by more than ``extract_tol`` relative to the largest block.
    """
    H0_hat = dc.as_matrix(H0_hat)
    H1_hat = dc.as_matrix(H1_hat)
    if H0_hat.shape != (m * r, m * r) or H1_hat.shape != (m * r, m * r):
        raise DimensionMismatch(f"embedded factors must be {m * r}x{m * r}")
    if m == 1:
        return [H0_hat.copy(), H1_hat.copy()]

    def blk(A, i, j):
        return A[i * r:(i + 1) * r, j * r:(j + 1) * r]

    copies = {k: [] for k in range(m + 1)}
    zeros = []
    for i in range(m):
        for j in range(m):
            if i >= j:
                copies[i - j].append(blk(H0_hat, i, j))
            else:
                zeros.append(blk(H0_hat, i, j))
            if j >= i:
                copies[m - (j - i)].append(blk(H1_hat, i, j))
            else:
                zeros.append(blk(H1_hat, i, j))
    hs = [np.mean(copies[k], axis=0) for k in range(m + 1)]
    scale = max(1.0, max(np.max(np.abs(h)) for h in hs))
    disc = 0.0
    for k in range(m + 1):
        for c in copies[k]:
            disc = max(disc, float(np.max(np.abs(c - hs[k]))))
    for z in zeros:
        disc = max(disc, float(np.max(np.abs(z))))
    if disc > extract_tol * scale:
        raise InconsistentBlocks(disc)
    return hs


def _det_high_precision(P, z, dps):
    with mpmath.workdps(dps):
        zz = mpmath.mpc(z.real, z.imag)
        M = mpmath.matrix(P.r, P.r)
        for k, C in P.coeffs.items():
            zk = zz**k
            for i in range(P.r):
                for j in range(P.r):
                    if C[i, j] != 0.0:
                        M[i, j] += mpmath.mpf(float(C[i, j])) * zk
        return complex(mpmath.det(M))


def det_poly(P, interp_tol=INTERP_TOL, dps=MP_DPS):
    """Determinant ``|P(z)|`` as a scalar Laurent polynomial.

    ``q(z) = z^{rm} |P(z)|`` is an ordinary polynomial of degree at most
    ``2 r m``; it is sampled at roots of unity and recovered by an inverse
    DFT. Near a multiple zero the determinant is a tiny number formed by
    heavy cancellation, so for ``r m <= 16`` the samples are computed with
    ``dps`` decimal digits (set ``dps=None`` to use double precision).
    Coefficients below ``interp_tol * max|coeff|`` are dropped.
    """
    r, m = P.r, P.m
    if r * m > 64:
        raise DimensionMismatch("determinant interpolation limited to r*m <= 64")
    shift = r * m
    deg = 2 * shift
    n = deg + 1
    w = np.exp(2j * np.pi * np.arange(n) / n)
    if dps and r * m <= 16:
        dets = [_det_high_precision(P, wk, dps) for wk in w]
    else:
        dets = [np.linalg.det(evaluate(P, wk)) for wk in w]
    vals = np.array([wk**shift * dk for wk, dk in zip(w, dets)])
    q = np.fft.fft(vals) / n  # q_j = (1/n) sum_k vals_k w_k^{-j}
    q = q.real
    big = np.max(np.abs(q)) if q.size else 0.0
    coeffs = {}
    for j, c in enumerate(q):
        if big > 0 and abs(c) > interp_tol * big:
            coeffs[j - shift] = float(c)
    return ScalarLaurentPoly(coeffs)


def _cluster(points, tol):
    """Single-linkage clusters of complex points; returns lists of indices."""
    n = len(points)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if abs(points[i] - points[j]) <= tol:
                parent[find(i)] = find(j)
    groups = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return list(groups.values())


def circle_zeros(q, circle_tol=CIRCLE_TOL, cluster_tol=CLUSTER_TOL):
    """Zeros of ``q`` grouped into clusters with multiplicities.

    Roots are companion-matrix eigenvalues of the associated ordinary
    polynomial. Each cluster is reported at its centroid, which is far more
    accurate than the individual perturbed roots of a multiple zero.
    """
    coeffs = q.ordinary()
    nz = np.flatnonzero(coeffs)
    if nz.size == 0:
        raise DegenerateInput("zero polynomial has no well-defined zeros")
    coeffs = coeffs[nz[0]:nz[-1] + 1]
    deg = coeffs.size - 1
    if deg == 0:
        return CircleZeroReport([], False)
    comp = np.zeros((deg, deg))
    comp[0, :] = -coeffs[1:] / coeffs[0]
    comp[1:, :-1] = np.eye(deg - 1)
    roots = dc.eigenvalues(comp)
    zeros = []
    for group in _cluster(list(roots), cluster_tol):
        centre = complex(np.mean(roots[group]))
        if abs(centre.imag) < cluster_tol * 1e-6:
            centre = complex(centre.real, 0.0)
        on = abs(abs(centre) - 1.0) <= circle_tol
        zeros.append(CircleZero(centre, len(group), on))
    zeros.sort(key=lambda z: (z.location.real, z.location.imag))
    return CircleZeroReport(zeros, any(z.on_circle for z in zeros))


def factor_product(H):
    """``H(z) H(z)^*`` for a one-sided ``H`` with keys in ``[-m, 0]``."""
    if any(k > 0 for k in H.coeffs):
        raise ValueError("factor_product expects H(z) = sum_j H_j z^{-j}")
    m = -H.kmin
    hs = [H.coeff(-j) for j in range(m + 1)]
    out = {}
    for k in range(-m, m + 1):
        acc = np.zeros((H.r, H.r))
        for j in range(m + 1):
            if 0 <= j + k <= m:
                acc += hs[j] @ hs[j + k].T
        out[k] = acc
    return MatLaurentPoly(out, r=H.r)
