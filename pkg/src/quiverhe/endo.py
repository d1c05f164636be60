"""Finite-dimensional Hermitian endomorphism algebra at a point.

Everything here is pointwise linear algebra for a quiver with a vertex
metric collection H = {H_i}: adjoints of arrow maps, twisted adjoints,
brackets, matrix functions of H-Hermitian positive endomorphisms, and the
two pointwise inequality oracles used by the solver's a-priori estimates.

Conventions.  A metric is a positive-definite Hermitian matrix with inner
product H(u, v) = v^H H u.  The adjoint of phi: E_t -> E_h is

    phi^{*H} = H_t^{-1} phi^H H_h          (E_h -> E_t),

the unique map with H_h(phi u, v) = H_t(u, phi^{*H} v).  An endomorphism
f is H-Hermitian when H f = f^H H; conjugating with S = H^{1/2} moves all
computations to a gauge where H-Hermitian means plain Hermitian.
"""

from __future__ import annotations

import numpy as np

from .errors import NotPositiveError, SingularMetricError, SingularTwistError
from .quiver import Quiver

HERMITIAN_TOL = 1e-12


# -- gauge and matrix-function helpers ---------------------------------------

def _check_metric(H: np.ndarray, where: str = "metric") -> None:
    if np.max(np.abs(H - H.conj().T)) > HERMITIAN_TOL * max(1.0, np.max(np.abs(H))):
        raise SingularMetricError(f"{where} is not Hermitian")
    try:
        np.linalg.cholesky(H)
    except np.linalg.LinAlgError:
        raise SingularMetricError(f"{where} is not positive definite") from None


def metric_sqrt(H: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(H^(1/2), H^(-1/2)) via eigendecomposition."""
    vals, vecs = np.linalg.eigh(H)
    if np.min(vals) <= 0:
        raise SingularMetricError("metric has nonpositive eigenvalue")
    root = np.sqrt(vals)
    return (vecs * root) @ vecs.conj().T, (vecs / root) @ vecs.conj().T


def is_hermitian_wrt(M: np.ndarray, H: np.ndarray, tol: float = 1e-10) -> bool:
    scale = max(1.0, float(np.max(np.abs(M))) * float(np.max(np.abs(H))))
    return bool(np.max(np.abs(H @ M - M.conj().T @ H)) <= tol * scale)


def herm_function(f: np.ndarray, H, func, require_positive: bool) -> np.ndarray:
    """Apply a scalar function to an H-Hermitian endomorphism by
    eigendecomposition in the unitary gauge of H (H=None means identity)."""
    if H is None:
        ftil = f
    else:
        S, Sinv = metric_sqrt(H)
        ftil = S @ f @ Sinv
    herm = 0.5 * (ftil + ftil.conj().T)
    vals, vecs = np.linalg.eigh(herm)
    if require_positive and np.min(vals) <= 0:
        raise NotPositiveError(f"endomorphism has eigenvalue {np.min(vals):.3e} <= 0")
    g = (vecs * func(vals)) @ vecs.conj().T
    if H is None:
        return g
    return Sinv @ g @ S


def herm_log(f: np.ndarray, H=None) -> np.ndarray:
    return herm_function(f, H, np.log, require_positive=True)


def herm_exp(x: np.ndarray, H=None) -> np.ndarray:
    return herm_function(x, H, np.exp, require_positive=False)


def herm_pow(f: np.ndarray, exponent: float, H=None) -> np.ndarray:
    if not 0 < exponent <= 1:
        raise NotPositiveError(f"fractional power needs 0 < exponent <= 1, got {exponent}")
    return herm_function(f, H, lambda v: v**exponent, require_positive=True)


# -- point data ----------------------------------------------------------------

class MetricPoint:
    """Per-vertex Hermitian positive-definite matrices."""

    def __init__(self, matrices):
        self.matrices = {v: np.asarray(M, dtype=complex) for v, M in matrices.items()}
        for v, M in self.matrices.items():
            _check_metric(M, where=f"H[{v!r}]")

    def __getitem__(self, v):
        return self.matrices[v]


class EndoPoint:
    """Per-vertex complex matrices; claims about hermiticity/positivity
    are verified on construction."""

    def __init__(self, matrices, metric: MetricPoint | None = None,
                 hermitian_wrt_H: bool = False, positive_definite: bool = False):
        self.matrices = {v: np.asarray(M, dtype=complex) for v, M in matrices.items()}
        self.hermitian_wrt_H = hermitian_wrt_H
        self.positive_definite = positive_definite
        if hermitian_wrt_H:
            if metric is None:
                raise NotPositiveError("hermitian claim needs the metric")
            for v, M in self.matrices.items():
                if not is_hermitian_wrt(M, metric[v]):
                    raise NotPositiveError(f"endo at {v!r} is not H-Hermitian")
        if positive_definite:
            if metric is None:
                raise NotPositiveError("positivity claim needs the metric")
            for v, M in self.matrices.items():
                herm_log(M, metric[v])  # raises NotPositiveError on failure

    def __getitem__(self, v):
        return self.matrices[v]


# -- arrow-level operations -----------------------------------------------------

def adjoint_wrt(phi, H, quiver: Quiver):
    """H-adjoint of every arrow map: phi_a^{*H} = H_t^{-1} phi_a^H H_h."""
    out = {}
    for a in quiver.arrows:
        Ht, Hh = H[a.tail], H[a.head]
        try:
            out[a.id] = np.linalg.solve(Ht, phi[a.id].conj().T @ Hh)
        except np.linalg.LinAlgError:
            raise SingularMetricError(f"H[{a.tail!r}] is singular") from None
    return out


def twisted_adjoint(phi, f, H, quiver: Quiver):
    """Adjoint for the twisted metric Hf: f_t^{-1} phi^{*H} f_h; equals
    adjoint_wrt(phi, {H_i f_i})."""
    star = adjoint_wrt(phi, H, quiver)
    out = {}
    for a in quiver.arrows:
        try:
            out[a.id] = np.linalg.solve(f[a.tail], star[a.id] @ f[a.head])
        except np.linalg.LinAlgError:
            raise SingularTwistError(f"f[{a.tail!r}] is singular") from None
    return out


def bracket(A, phi, quiver: Quiver):
    """[A, phi]_a = A_{h(a)} phi_a - phi_a A_{t(a)} for every arrow."""
    return {a.id: A[a.head] @ phi[a.id] - phi[a.id] @ A[a.tail] for a in quiver.arrows}


def moment_term(vertex: str, phi, f, H, quiver: Quiver) -> np.ndarray:
    """sum_{h(a)=i} phi_a phi_a^{*Hf} - sum_{t(a)=i} phi_a^{*Hf} phi_a,
    Hermitian with respect to H_i f_i."""
    twisted = twisted_adjoint(phi, f, H, quiver)
    r = H[vertex].shape[0]
    out = np.zeros((r, r), dtype=complex)
    for a in quiver.arrows_into(vertex):
        out += phi[a.id] @ twisted[a.id]
    for a in quiver.arrows_out_of(vertex):
        out -= twisted[a.id] @ phi[a.id]
    return out


# -- inner products ---------------------------------------------------------------

def endo_inner(A: np.ndarray, B: np.ndarray, H: np.ndarray) -> complex:
    """<A, B>_H = Tr(A B^{*H}) on endomorphisms."""
    Bstar = np.linalg.solve(H, B.conj().T @ H)
    return complex(np.trace(A @ Bstar))


def hom_inner(M: np.ndarray, N: np.ndarray, H_dom: np.ndarray, H_cod: np.ndarray) -> complex:
    """<M, N> for maps E_dom -> E_cod with the induced Hom metric."""
    Nstar = np.linalg.solve(H_dom, N.conj().T @ H_cod)
    return complex(np.trace(M @ Nstar))


# -- inequality oracles -------------------------------------------------------------

def prop36_gap(f, phi, H, quiver: Quiver) -> float:
    """LHS - RHS of the twisted-vs-plain moment pairing inequality

        sum_i < sum_{h(a)=i} phi f_t^{-1} phi^{*H} f_i
              - sum_{t(a)=i} f_i^{-1} phi^{*H} f_h phi,  log f_i >_{H_i}
        >= sum_i < sum phi phi^{*H} - sum phi^{*H} phi,  log f_i >_{H_i};

    the gap is nonnegative for every positive f (eigenframe computation:
    each arrow entry contributes |phi_AB|^2 (x e^x - x) with
    x = theta_A - theta_B)."""
    star = adjoint_wrt(phi, H, quiver)
    twisted = twisted_adjoint(phi, f, H, quiver)
    logs = {v: herm_log(f[v], H[v]) for v in quiver.vertices}
    lhs = rhs = 0.0
    for v in quiver.vertices:
        r = H[v].shape[0]
        Tt = np.zeros((r, r), dtype=complex)
        Mp = np.zeros((r, r), dtype=complex)
        for a in quiver.arrows_into(v):
            Tt += phi[a.id] @ twisted[a.id]
            Mp += phi[a.id] @ star[a.id]
        for a in quiver.arrows_out_of(v):
            Tt -= twisted[a.id] @ phi[a.id]
            Mp -= star[a.id] @ phi[a.id]
        lhs += endo_inner(Tt, logs[v], H[v]).real
        rhs += endo_inner(Mp, logs[v], H[v]).real
    return lhs - rhs


def prop310_phi_gap(f, varsigma: float, phi, H, quiver: Quiver) -> float:
    """LHS - RHS of the fractional-power pairing chain (0 < varsigma <= 1):

        sum_a < f_t^{-1} phi^{*H} f_h, [phi^{*H}, f^s]_a >
        >= sum_i < sum phi phi^{*H} - sum phi^{*H} phi, f_i^s >_{H_i}
         + sum_a | f_t^{-s/2} [phi^{*H}, f^s]_a |^2.

    Nonnegative by the eigenframe identity: each entry contributes
    |phi_AB|^2 (e^x - e^{s x})(e^{s theta_A} - e^{s theta_B}) >= 0."""
    if not 0 < varsigma <= 1:
        raise NotPositiveError(f"varsigma must lie in (0, 1], got {varsigma}")
    star = adjoint_wrt(phi, H, quiver)
    pows = {v: herm_pow(f[v], varsigma, H[v]) for v in quiver.vertices}
    halfinv = {v: herm_function(f[v], H[v], lambda x: x ** (-varsigma / 2.0),
                                require_positive=True) for v in quiver.vertices}
    lhs = rhs = 0.0
    for a in quiver.arrows:
        comm = star[a.id] @ pows[a.head] - pows[a.tail] @ star[a.id]
        lhs_map = np.linalg.solve(f[a.tail], star[a.id] @ f[a.head])
        lhs += hom_inner(lhs_map, comm, H[a.head], H[a.tail]).real
        weighted = halfinv[a.tail] @ comm
        rhs += hom_inner(weighted, weighted, H[a.head], H[a.tail]).real
    for v in quiver.vertices:
        r = H[v].shape[0]
        Mp = np.zeros((r, r), dtype=complex)
        for a in quiver.arrows_into(v):
            Mp += phi[a.id] @ star[a.id]
        for a in quiver.arrows_out_of(v):
            Mp -= star[a.id] @ phi[a.id]
        rhs += endo_inner(Mp, pows[v], H[v]).real
    return lhs - rhs


# -- simpleness probe ------------------------------------------------------------

def commutant_dimension(quiver: Quiver, phi, ranks, tol: float = 1e-8) -> int:
    """Dimension of {A in prod End(E_i) : A_h phi_a = phi_a A_t for all a},
    computed as the numerical null space of the stacked bracket map.
    Generic nonzero arrows on a connected quiver give dimension 1 (scalars),
    the pointwise form of simpleness."""
    sizes = {v: ranks[v] * ranks[v] for v in quiver.vertices}
    offsets = {}
    total = 0
    for v in quiver.vertices:
        offsets[v] = total
        total += sizes[v]
    rows = []
    for a in quiver.arrows:
        rt, rh = ranks[a.tail], ranks[a.head]
        block = np.zeros((rh * rt, total), dtype=complex)
        ph = phi[a.id]
        # A_h phi - phi A_t, vectorized column-major: vec(AXB) = (B^T kron A) vec(X)
        block[:, offsets[a.head]:offsets[a.head] + rh * rh] = np.kron(ph.T, np.eye(rh))
        block[:, offsets[a.tail]:offsets[a.tail] + rt * rt] = -np.kron(np.eye(rt), ph)
        rows.append(block)
    if not rows:
        return total
    system = np.vstack(rows)
    svals = np.linalg.svd(system, compute_uv=False)
    scale = svals[0] if svals.size and svals[0] > 0 else 1.0
    return int(total - np.sum(svals > tol * scale))


# -- seeded random instances and property sweeps -----------------------------------

def random_instance(rng, max_vertices: int = 4, max_rank: int = 4,
                    max_arrows: int = 4, scale: float = 1.0):
    """One random (quiver, ranks, H, f, phi) tuple.

    H_i is a shifted Wishart metric, f_i = exp of a random H-Hermitian
    matrix with spectral scale ~``scale``, phi_a complex Gaussian.
    Loops and multi-arrows are allowed.
    """
    from .quiver import build_quiver as _bq

    n = int(rng.integers(1, max_vertices + 1))
    verts = [f"v{k}" for k in range(n)]
    n_arrows = int(rng.integers(0, max_arrows + 1))
    arrows = [
        (f"a{k}", verts[int(rng.integers(n))], verts[int(rng.integers(n))])
        for k in range(n_arrows)
    ]
    quiver = _bq(verts, arrows)
    ranks = {v: int(rng.integers(1, max_rank + 1)) for v in verts}
    H, f = {}, {}
    for v in verts:
        r = ranks[v]
        A = rng.standard_normal((r, r)) + 1j * rng.standard_normal((r, r))
        H[v] = A @ A.conj().T + (0.4 + rng.random()) * np.eye(r)
        X = rng.standard_normal((r, r)) + 1j * rng.standard_normal((r, r))
        X = 0.5 * (X + X.conj().T)
        radius = float(np.max(np.abs(np.linalg.eigvalsh(X)))) or 1.0
        S, Sinv = metric_sqrt(H[v])
        f[v] = Sinv @ herm_exp(X * (scale / radius)) @ S
    phi = {}
    for a in quiver.arrows:
        rt, rh = ranks[a.tail], ranks[a.head]
        phi[a.id] = rng.standard_normal((rh, rt)) + 1j * rng.standard_normal((rh, rt))
    return quiver, ranks, H, f, phi


VARSIGMAS = (0.25, 0.5, 1.0)


def run_property_sweep(seed: int, instances: int, max_vertices: int = 4,
                       max_rank: int = 4, gap_floor: float = -1e-10,
                       adjoint_tol: float = 1e-10):
    """Seeded sweep of the pointwise oracles; returns a summary dict.

    Checks per instance: the adjoint defining identity on random vectors,
    double-adjoint involution, moment-term hermiticity for the twisted
    metric, trace telescoping at f = Id, and both inequality gaps
    (varsigma cycling through 1/4, 1/2, 1).  Failures carry a replay
    record (seed and instance index).
    """
    rng = np.random.default_rng(seed)
    summary = {
        "seed": seed,
        "instances": instances,
        "min_prop36_gap": np.inf,
        "min_prop310_gap": np.inf,
        "max_adjoint_residual": 0.0,
        "max_involution_residual": 0.0,
        "max_moment_hermiticity": 0.0,
        "max_trace_telescope": 0.0,
        "failures": [],
    }

    def fail(index, check, value):
        summary["failures"].append({
            "instance": index, "check": check, "value": float(value), "seed": seed,
        })

    for k in range(instances):
        quiver, ranks, H, f, phi = random_instance(
            rng, max_vertices=max_vertices, max_rank=max_rank)
        star = adjoint_wrt(phi, H, quiver)
        for a in quiver.arrows:
            u = rng.standard_normal(ranks[a.tail]) + 1j * rng.standard_normal(ranks[a.tail])
            v = rng.standard_normal(ranks[a.head]) + 1j * rng.standard_normal(ranks[a.head])
            u /= np.linalg.norm(u)
            v /= np.linalg.norm(v)
            lhs = v.conj() @ H[a.head] @ (phi[a.id] @ u)
            rhs = (star[a.id] @ v).conj() @ H[a.tail] @ u
            resid = abs(lhs - rhs) / max(abs(lhs), 1.0)
            summary["max_adjoint_residual"] = max(summary["max_adjoint_residual"], resid)
            if resid > adjoint_tol:
                fail(k, "adjoint_identity", resid)
            back = np.linalg.solve(H[a.head], star[a.id].conj().T @ H[a.tail])
            inv = float(np.max(np.abs(back - phi[a.id])) / max(1.0, np.max(np.abs(phi[a.id]))))
            summary["max_involution_residual"] = max(summary["max_involution_residual"], inv)
            if inv > adjoint_tol:
                fail(k, "double_adjoint", inv)
        ident = {v: np.eye(ranks[v], dtype=complex) for v in quiver.vertices}
        telescope = 0.0
        for v in quiver.vertices:
            mom = moment_term(v, phi, f, H, quiver)
            Htil = H[v] @ f[v]
            herm = float(np.max(np.abs(Htil @ mom - mom.conj().T @ Htil)))
            herm /= max(1.0, float(np.max(np.abs(mom))) * float(np.max(np.abs(Htil))))
            summary["max_moment_hermiticity"] = max(summary["max_moment_hermiticity"], herm)
            if herm > 1e-10:
                fail(k, "moment_hermitian", herm)
            telescope += np.trace(moment_term(v, phi, ident, H, quiver)).real
        scale = 1.0 + sum(float(np.max(np.abs(p))) ** 2 for p in phi.values())
        summary["max_trace_telescope"] = max(summary["max_trace_telescope"],
                                             abs(telescope) / scale)
        if abs(telescope) / scale > 1e-10:
            fail(k, "trace_telescope", telescope)
        g36 = prop36_gap(f, phi, H, quiver)
        summary["min_prop36_gap"] = min(summary["min_prop36_gap"], g36)
        if g36 < gap_floor:
            fail(k, "prop36_gap", g36)
        vs = VARSIGMAS[k % len(VARSIGMAS)]
        g310 = prop310_phi_gap(f, vs, phi, H, quiver)
        summary["min_prop310_gap"] = min(summary["min_prop310_gap"], g310)
        if g310 < gap_floor:
            fail(k, "prop310_gap", g310)
    summary["min_prop36_gap"] = float(summary["min_prop36_gap"])
    summary["min_prop310_gap"] = float(summary["min_prop310_gap"])
    summary["passed"] = not summary["failures"]
    return summary
