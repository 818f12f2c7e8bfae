"""Scalar weight fields, Wirtinger derivatives, Levi forms, Hermitian (1,1)-forms.

Evaluators are vectorized: they take an (m, n) complex array of points and
return (m,) real values (gradients: (m, n) complex; Hessians: (m, n, n)
complex Hermitian).  Upper semi-continuous fields may return -inf on their
pole set.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ContinuityRequiredError, PoleInStencilError
from .geometry import DomainBox, as_point, as_points

DEFAULT_FD_STEP = 1e-3
HERMITIAN_TOL = 1e-12


@dataclass(frozen=True)
class ScalarField:
    """A weight function on (a domain of) C^n.

    smoothness is one of "usc", "C0", "C2"; differential operators require
    "C2".  Analytic gradient/Hessian, when present, take precedence over
    finite differences.
    """

    name: str
    n: int
    evaluate: Callable[[np.ndarray], np.ndarray]
    grad: Optional[Callable[[np.ndarray], np.ndarray]] = None
    hess: Optional[Callable[[np.ndarray], np.ndarray]] = None
    pole: Optional[Callable[[np.ndarray], np.ndarray]] = None
    smoothness: str = "C2"
    domain: Optional[DomainBox] = None

    def __post_init__(self):
        if self.smoothness not in ("usc", "C0", "C2"):
            raise ValueError(f"unknown smoothness tag {self.smoothness!r}")

    def __call__(self, pts) -> np.ndarray:
        return self.evaluate(as_points(pts, self.n))

    def value_at(self, z) -> float:
        return float(self.evaluate(as_points(z, self.n))[0])

    def is_pole(self, pts) -> np.ndarray:
        z = as_points(pts, self.n)
        if self.pole is not None:
            return np.asarray(self.pole(z), dtype=bool)
        return np.zeros(z.shape[0], dtype=bool)

    def __add__(self, other: "ScalarField") -> "ScalarField":
        if other.n != self.n:
            raise ValueError("cannot add fields of different dimensions")
        f, g = self, other
        grad = None
        if f.grad is not None and g.grad is not None:
            grad = lambda z: f.grad(z) + g.grad(z)
        hess = None
        if f.hess is not None and g.hess is not None:
            hess = lambda z: f.hess(z) + g.hess(z)
        pole = None
        if f.pole is not None or g.pole is not None:
            pole = lambda z: f.is_pole(z) | g.is_pole(z)
        order = {"usc": 0, "C0": 1, "C2": 2}
        smooth = min((f.smoothness, g.smoothness), key=order.get)
        domain = f.domain or g.domain
        return ScalarField(
            f"{f.name}+{g.name}", self.n,
            lambda z: f.evaluate(z) + g.evaluate(z),
            grad, hess, pole, smooth, domain,
        )

@dataclass(frozen=True)
class HermitianField:
    """Coefficient field of a continuous real (1,1)-form: z -> Hermitian (n, n)."""

    name: str
    n: int
    evaluate: Callable[[np.ndarray], np.ndarray]

    def __call__(self, pts) -> np.ndarray:
        z = as_points(pts, self.n)
        g = np.asarray(self.evaluate(z), dtype=complex)
        dev = np.max(np.abs(g - g.conj().swapaxes(-1, -2)))
        if dev > HERMITIAN_TOL:
            raise ValueError(f"coefficient matrix not Hermitian: deviation {dev:.3e}")
        return g


def zero_omega(n: int) -> HermitianField:
    return HermitianField(
        "zero", n, lambda z: np.zeros((z.shape[0], n, n), dtype=complex)
    )


def constant_omega(matrix, name: str = "const") -> HermitianField:
    m = np.asarray(matrix, dtype=complex)
    n = m.shape[0]
    return HermitianField(
        name, n, lambda z: np.broadcast_to(m, (z.shape[0], n, n)).copy()
    )


def scaled_sq_omega(c: float, n: int) -> HermitianField:
    """g(z) = c |z|^2 I, the coefficient field of c|z|^2 times the Euclidean form."""

    def ev(z):
        sq = np.sum(np.abs(z) ** 2, axis=-1)
        return sq[:, None, None] * np.eye(n)[None, :, :] * c

    return HermitianField(f"sq:{c}", n, ev)


# ---------------------------------------------------------------------------
# builtin corpus
# ---------------------------------------------------------------------------


def sq_norm(n: int) -> ScalarField:
    return ScalarField(
        "sq_norm", n,
        lambda z: np.sum(np.abs(z) ** 2, axis=-1),
        grad=lambda z: np.conj(z),
        hess=lambda z: np.broadcast_to(np.eye(n), (z.shape[0], n, n)).astype(complex),
    )


def neg_sq_norm(n: int) -> ScalarField:
    return ScalarField(
        "neg_sq_norm", n,
        lambda z: -np.sum(np.abs(z) ** 2, axis=-1),
        grad=lambda z: -np.conj(z),
        hess=lambda z: -np.broadcast_to(np.eye(n), (z.shape[0], n, n)).astype(complex),
    )


def saddle(lam: float = 2.0) -> ScalarField:
    """|z1|^2 - lam |z2|^2 on C^2."""
    h = np.diag([1.0, -lam]).astype(complex)

    def grad(z):
        g = np.conj(z).copy()
        g[:, 1] *= -lam
        return g

    return ScalarField(
        f"saddle:{lam:g}", 2,
        lambda z: np.abs(z[:, 0]) ** 2 - lam * np.abs(z[:, 1]) ** 2,
        grad=grad,
        hess=lambda z: np.broadcast_to(h, (z.shape[0], 2, 2)).copy(),
    )


def log_abs(a=None, n: int = 1) -> ScalarField:
    """log |z - a| (Euclidean norm); pole at a, harmonic when n = 1."""
    av = np.zeros(n, dtype=complex) if a is None else as_point(a)
    if av.size != n:
        raise ValueError(f"pole location has dimension {av.size}, expected {n}")

    def ev(z):
        with np.errstate(divide="ignore"):
            return np.log(np.linalg.norm(z - av, axis=-1))

    def grad(z):
        d = z - av
        u = np.sum(np.abs(d) ** 2, axis=-1)
        return 0.5 * np.conj(d) / u[:, None]

    def hess(z):
        d = z - av
        u = np.sum(np.abs(d) ** 2, axis=-1)
        eye = np.eye(n)[None, :, :]
        outer = np.conj(d)[:, :, None] * d[:, None, :]
        return 0.5 * (eye / u[:, None, None] - outer / (u**2)[:, None, None])

    return ScalarField(
        f"log_abs:{av.tolist()}", n, ev, grad=grad, hess=hess,
        pole=lambda z: np.linalg.norm(z - av, axis=-1) == 0.0,
    )


def re_linear(a=None, n: int = 1) -> ScalarField:
    """Re(sum_j a_j z_j); pluriharmonic."""
    av = None
    if a is not None:
        av = as_point(a)
        n = av.size
    if av is None:
        av = np.zeros(n, dtype=complex)
        av[0] = 1.0

    return ScalarField(
        f"re_linear:{av.tolist()}", n,
        lambda z: np.real(z @ av),
        grad=lambda z: np.broadcast_to(av / 2.0, (z.shape[0], n)).copy(),
        hess=lambda z: np.zeros((z.shape[0], n, n), dtype=complex),
    )


def log1p_sq(n: int = 1) -> ScalarField:
    """log(1 + |z|^2), strictly psh with bounded Levi form."""

    def grad(z):
        u = 1.0 + np.sum(np.abs(z) ** 2, axis=-1)
        return np.conj(z) / u[:, None]

    def hess(z):
        u = 1.0 + np.sum(np.abs(z) ** 2, axis=-1)
        eye = np.eye(n)[None, :, :]
        outer = np.conj(z)[:, :, None] * z[:, None, :]
        return eye / u[:, None, None] - outer / (u**2)[:, None, None]

    return ScalarField(
        "log1p_sq", n,
        lambda z: np.log1p(np.sum(np.abs(z) ** 2, axis=-1)),
        grad=grad, hess=hess,
    )


def max_log() -> ScalarField:
    """max(log|z1|, log|z2|) on C^2; psh, C2 off the tie set {|z1| = |z2|}.

    The closed-form Hessian is 0 wherever one branch strictly wins; callers
    doing finite differences must stay off the tie set and the axes.
    """

    def ev(z):
        with np.errstate(divide="ignore"):
            return np.maximum(np.log(np.abs(z[:, 0])), np.log(np.abs(z[:, 1])))

    def grad(z):
        first = np.abs(z[:, 0]) >= np.abs(z[:, 1])
        g = np.zeros_like(z)
        with np.errstate(divide="ignore", invalid="ignore"):
            g[first, 0] = 0.5 / z[first, 0]
            g[~first, 1] = 0.5 / z[~first, 1]
        return g

    return ScalarField(
        "max_log", 2, ev, grad=grad,
        hess=lambda z: np.zeros((z.shape[0], 2, 2), dtype=complex),
        pole=lambda z: np.all(z == 0.0, axis=-1),
    )


def cross() -> ScalarField:
    """Re(z1 conj(z2)) on C^2; indefinite Levi form [[0,1/2],[1/2,0]]."""
    h = np.array([[0.0, 0.5], [0.5, 0.0]], dtype=complex)

    def grad(z):
        g = np.empty_like(z)
        g[:, 0] = 0.5 * np.conj(z[:, 1])
        g[:, 1] = 0.5 * np.conj(z[:, 0])
        return g

    return ScalarField(
        "cross", 2,
        lambda z: np.real(z[:, 0] * np.conj(z[:, 1])),
        grad=grad,
        hess=lambda z: np.broadcast_to(h, (z.shape[0], 2, 2)).copy(),
    )


def neg_gauss(n: int = 1) -> ScalarField:
    """-exp(-|z|^2); Levi form e^{-|z|^2}(I - conj(z) z^T), indefinite for |z| > 1."""

    def ev(z):
        return -np.exp(-np.sum(np.abs(z) ** 2, axis=-1))

    def grad(z):
        e = np.exp(-np.sum(np.abs(z) ** 2, axis=-1))
        return e[:, None] * np.conj(z)

    def hess(z):
        e = np.exp(-np.sum(np.abs(z) ** 2, axis=-1))
        eye = np.eye(n)[None, :, :]
        outer = np.conj(z)[:, :, None] * z[:, None, :]
        return e[:, None, None] * (eye - outer)

    return ScalarField("neg_gauss", n, ev, grad=grad, hess=hess)


FIELD_IDS = (
    "sq_norm", "neg_sq_norm", "saddle", "log_abs", "re_linear",
    "log1p_sq", "max_log", "cross", "neg_gauss",
)


def get_field(spec: str, n: int) -> ScalarField:
    """Resolve a corpus id like "saddle:2" or "log_abs:[[1,0]]" to a field."""
    base, _, raw = spec.partition(":")
    param = json.loads(raw) if raw else None
    if base == "sq_norm":
        return sq_norm(n)
    if base == "neg_sq_norm":
        return neg_sq_norm(n)
    if base == "saddle":
        if n != 2:
            raise ValueError("saddle is a C^2 corpus entry; use --dim 2")
        return saddle(2.0 if param is None else float(param))
    if base == "log_abs":
        return log_abs(None if param is None else parse_point(param, n), n)
    if base == "re_linear":
        return re_linear(None if param is None else parse_point(param, n), n)
    if base == "log1p_sq":
        return log1p_sq(n)
    if base == "max_log":
        if n != 2:
            raise ValueError("max_log is a C^2 corpus entry; use --dim 2")
        return max_log()
    if base == "cross":
        if n != 2:
            raise ValueError("cross is a C^2 corpus entry; use --dim 2")
        return cross()
    if base == "neg_gauss":
        return neg_gauss(n)
    raise ValueError(f"unknown field id {base!r}; known ids: {', '.join(FIELD_IDS)}")


def get_omega(spec: str, n: int) -> HermitianField:
    base, _, raw = spec.partition(":")
    param = json.loads(raw) if raw else None
    if base == "zero":
        return zero_omega(n)
    if base == "const":
        c = 1.0 if param is None else float(param)
        return constant_omega(c * np.eye(n), name=f"const:{c:g}")
    if base == "sq":
        return scaled_sq_omega(1.0 if param is None else float(param), n)
    raise ValueError(f"unknown omega id {base!r}; known ids: zero, const, sq")


def parse_point(param, n: int = 0) -> np.ndarray:
    """Points are JSON arrays of [re, im] pairs; n > 0 pins the dimension."""
    arr = np.asarray(param, dtype=float)
    if arr.ndim == 1 and arr.size == 2:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("point JSON must be an array of [re, im] pairs")
    out = arr[:, 0] + 1j * arr[:, 1]
    if n and out.size != n:
        raise ValueError(f"parameter has dimension {out.size}, expected {n}")
    return out


# ---------------------------------------------------------------------------
# Wirtinger calculus by central differences
# ---------------------------------------------------------------------------


def _effective_step(z: np.ndarray, h: float) -> float:
    return h * (1.0 + float(np.linalg.norm(z)))


def _check_stencil(phi: ScalarField, pts: np.ndarray, vals: np.ndarray) -> None:
    bad = phi.is_pole(pts) | ~np.isfinite(vals)
    if np.any(bad):
        raise PoleInStencilError("pole in stencil")
    if phi.domain is not None and not np.all(phi.domain.contains(pts)):
        raise PoleInStencilError("stencil escapes the field's domain")


def _require_c2(phi: ScalarField) -> None:
    if phi.smoothness != "C2":
        raise ContinuityRequiredError(
            f"field {phi.name!r} is tagged {phi.smoothness}; differential "
            "operators require a C2 field"
        )


def wirtinger_grad(
    phi: ScalarField, z, h: float = DEFAULT_FD_STEP, use_analytic: bool = True
) -> np.ndarray:
    """(d/dz_j) phi = (d/dx_j - i d/dy_j)/2 by central differences of step h."""
    z = as_point(z)
    n = phi.n
    _require_c2(phi)
    if use_analytic and phi.grad is not None:
        return phi.grad(z[None, :])[0]
    he = _effective_step(z, h)
    eye = np.eye(n)
    pts = np.concatenate(
        [
            z[None, :] + he * eye,
            z[None, :] - he * eye,
            z[None, :] + 1j * he * eye,
            z[None, :] - 1j * he * eye,
            z[None, :],
        ]
    )
    vals = phi.evaluate(pts)
    _check_stencil(phi, pts, vals)
    dx = (vals[0:n] - vals[n : 2 * n]) / (2.0 * he)
    dy = (vals[2 * n : 3 * n] - vals[3 * n : 4 * n]) / (2.0 * he)
    return 0.5 * (dx - 1j * dy)


def levi_form(
    phi: ScalarField, z, h: float = DEFAULT_FD_STEP, use_analytic: bool = True
) -> np.ndarray:
    """Mixed Wirtinger Hessian (d^2 phi / dz_j dzbar_k), exactly Hermitian.

    Each mixed entry combines the four real cross-stencils in
    (x_j, y_j, x_k, y_k); the result is symmetrized to (M + M^H)/2.
    """
    z = as_point(z)
    n = phi.n
    _require_c2(phi)
    if use_analytic and phi.hess is not None:
        m = phi.hess(z[None, :])[0]
        dev = np.max(np.abs(m - m.conj().T))
        if dev > HERMITIAN_TOL:
            raise ValueError(
                f"declared Hessian of {phi.name!r} is not Hermitian: deviation {dev:.3e}"
            )
        return 0.5 * (m + m.conj().T)
    he = _effective_step(z, h)
    eye = np.eye(n)

    pts = [z[None, :]]
    for j in range(n):
        for step in (he * eye[j], 1j * he * eye[j]):
            pts.append((z + step)[None, :])
            pts.append((z - step)[None, :])
    pair_offsets = []
    for j in range(n):
        for k in range(j + 1, n):
            for a in (he * eye[j], 1j * he * eye[j]):
                for b in (he * eye[k], 1j * he * eye[k]):
                    pair_offsets.append((a, b))
                    pts.append((z + a + b)[None, :])
                    pts.append((z + a - b)[None, :])
                    pts.append((z - a + b)[None, :])
                    pts.append((z - a - b)[None, :])
    pts = np.concatenate(pts)
    vals = phi.evaluate(pts)
    _check_stencil(phi, pts, vals)

    f0 = vals[0]
    m = np.zeros((n, n), dtype=complex)
    pos = 1
    for j in range(n):
        fxp, fxm = vals[pos], vals[pos + 1]
        fyp, fym = vals[pos + 2], vals[pos + 3]
        pos += 4
        m[j, j] = (fxp + fxm + fyp + fym - 4.0 * f0) / (4.0 * he * he)
    idx = 0
    for j in range(n):
        for k in range(j + 1, n):
            cross_d = np.empty(4, dtype=float)
            for q in range(4):
                fpp, fpm, fmp, fmm = vals[pos : pos + 4]
                pos += 4
                cross_d[q] = (fpp - fpm - fmp + fmm) / (4.0 * he * he)
            idx += 1
            # order of q: (x_j,x_k), (x_j,y_k), (y_j,x_k), (y_j,y_k)
            m[j, k] = (cross_d[0] + 1j * cross_d[1] - 1j * cross_d[2] + cross_d[3]) / 4.0
            m[k, j] = np.conj(m[j, k])
    return 0.5 * (m + m.conj().T)


def min_levi_eigenvalue(
    phi: ScalarField,
    omega: HermitianField,
    z,
    h: float = DEFAULT_FD_STEP,
    use_analytic: bool = True,
):
    """Smallest eigenvalue and unit eigenvector of levi_form(phi, z) - g(z)."""
    z = as_point(z)
    m = levi_form(phi, z, h=h, use_analytic=use_analytic) - omega(z[None, :])[0]
    w, v = np.linalg.eigh(m)
    lam = float(w[0])
    xi = v[:, 0]
    residual = float(np.linalg.norm(m @ xi - lam * xi))
    if residual > 1e-8:
        raise ArithmeticError(f"eigenpair residual {residual:.3e} exceeds 1e-8")
    return lam, xi


@dataclass(frozen=True)
class LowerBoundVerdict:
    holds: bool
    z0: Optional[np.ndarray]
    xi: Optional[np.ndarray]
    c: float
    lambda_min: float


def check_lower_bound(
    phi: ScalarField,
    omega: HermitianField,
    region: DomainBox,
    resolution: int = 9,
    tol: float = 1e-9,
    h: float = DEFAULT_FD_STEP,
    use_analytic: bool = True,
) -> LowerBoundVerdict:
    """Grid scan of the smallest eigenvalue of levi_form(phi) - g over a region.

    "holds" means lambda_min >= -tol at every node; otherwise the worst node,
    its eigenvector, and c = -lambda_min are returned.
    """
    _require_c2(phi)
    pts = region.grid_points(resolution)
    if pts.shape[0] == 0:
        raise ValueError("region grid is empty; increase resolution")
    vals = phi(pts)
    if np.any(~np.isfinite(vals)) or np.any(phi.is_pole(pts)):
        raise PoleInStencilError("pole in region")
    if use_analytic and phi.hess is not None:
        hs = np.asarray(phi.hess(pts), dtype=complex)
        hs = 0.5 * (hs + hs.conj().swapaxes(-1, -2))
    else:
        hs = np.stack([levi_form(phi, p, h=h, use_analytic=False) for p in pts])
    diff = hs - omega(pts)
    eigs = np.linalg.eigvalsh(diff)[:, 0]
    worst = int(np.argmin(eigs))
    lam_min = float(eigs[worst])
    if lam_min >= -tol:
        return LowerBoundVerdict(True, None, None, 0.0, lam_min)
    _, v = np.linalg.eigh(diff[worst])
    return LowerBoundVerdict(False, pts[worst], v[:, 0], -lam_min, lam_min)
