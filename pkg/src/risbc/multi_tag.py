"""Multi-tag SINR model and the alternating quadratic-transform phase optimizer.

Solver convention: ``theta`` is the complex N-vector with ``theta^H a`` entering
every gain, so the RIS reflection coefficients are ``conj(theta)``.  Each
element is constrained to the disk ``|theta_n| <= eta_n``.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize

from .channel import LinkParams, sample_link
from .single_tag import SingleTagLinks, SystemParams


class InfeasibleError(RuntimeError):
    """No phase vector meets every tag's activation threshold."""


@dataclass(frozen=True)
class MultiTagInstance:
    """One realization of the complex channels for K tags sharing one RIS."""

    f: np.ndarray
    u: np.ndarray
    g: np.ndarray
    h: np.ndarray
    sys: SystemParams

    def __post_init__(self):
        f = np.atleast_1d(np.asarray(self.f, dtype=complex))
        u = np.atleast_1d(np.asarray(self.u, dtype=complex))
        h = np.atleast_1d(np.asarray(self.h, dtype=complex))
        g = np.asarray(self.g, dtype=complex).reshape(f.size, h.size)
        if u.shape != f.shape:
            raise ValueError("f and u must have one entry per tag")
        if h.size != self.sys.N:
            raise ValueError(f"h has {h.size} elements but N={self.sys.N}")
        for name, val in (("f", f), ("u", u), ("g", g), ("h", h)):
            object.__setattr__(self, name, val)

    @property
    def K(self):
        return self.f.size

    @property
    def N(self):
        return self.h.size

    @property
    def a(self):
        """Reader-side cascades a_k = u_k (g_k * h), shape (K, N)."""
        return self.u[:, None] * self.g * self.h[None, :]

    @property
    def b(self):
        return self.u * self.f

    @property
    def a_bar(self):
        """Tag-side cascades g_k * h, shape (K, N)."""
        return self.g * self.h[None, :]

    @property
    def b_bar(self):
        return self.f

    @property
    def radius(self):
        return self.sys.eta_vector()

    def rotate_readers(self, phase):
        """Multiply each u_k by a unit phasor; SINRs are unchanged."""
        return replace(self, u=self.u * phase)

    def pad(self, g_extra, h_extra, eta=None):
        """Append RIS elements to the same draw (used for N-monotonicity probes).

        ``eta`` gives the new elements' amplitudes; by default they copy the first element.
        """
        h_extra = np.atleast_1d(h_extra)
        h = np.concatenate([self.h, h_extra])
        g = np.concatenate([self.g, np.asarray(g_extra).reshape(self.K, -1)], axis=1)
        old = self.sys.eta_vector()
        new = np.broadcast_to(old[0] if eta is None else eta, h_extra.shape)
        amps = np.concatenate([old, new])
        eta_all = float(amps[0]) if np.all(amps == amps[0]) else tuple(amps)
        return MultiTagInstance(self.f, self.u, g, h, replace(self.sys, N=h.size, eta=eta_all))


@dataclass(frozen=True)
class MultiTagGeometry:
    """Per-tag link statistics; ``h`` (emitter-RIS) is shared by every tag."""

    f: tuple
    u: tuple
    g: tuple
    h: LinkParams

    def __post_init__(self):
        if not (len(self.f) == len(self.u) == len(self.g)) or not self.f:
            raise ValueError("f, u and g need one LinkParams per tag")

    @classmethod
    def from_single(cls, links: SingleTagLinks):
        return cls((links.f,), (links.u,), (links.g,), links.h)

    @property
    def K(self):
        return len(self.f)

    def sample(self, sys: SystemParams, rng):
        N = sys.N
        f = np.array([sample_link(p, rng) for p in self.f])
        u = np.array([sample_link(p, rng) for p in self.u])
        g = np.array([sample_link(p, rng, size=N) for p in self.g]).reshape(self.K, N)
        h = sample_link(self.h, rng, size=N)
        return MultiTagInstance(f, u, g, h, sys)


def gains(inst, theta):
    """s_k = b_k + theta^H a_k for every tag."""
    return inst.b + inst.a @ np.conj(theta)


def _interference(inst, s):
    pw = inst.sys.beta * inst.sys.P * np.abs(s) ** 2
    return pw.sum() - pw


def sinr(inst, theta, k=None):
    s = gains(inst, theta)
    bp = inst.sys.beta * inst.sys.P
    out = bp * np.abs(s) ** 2 / (_interference(inst, s) + inst.sys.noise)
    return out if k is None else float(out[k])


def sinr_from_channels(inst, coefficients, k=None):
    """SINR straight from u_k (f_k + g_k^T Theta h) with Theta = diag(coefficients)."""
    coefficients = np.asarray(coefficients, dtype=complex)
    bp = inst.sys.beta * inst.sys.P
    y = np.array([inst.u[i] * (inst.f[i] + np.sum(inst.g[i] * coefficients * inst.h))
                  for i in range(inst.K)])
    pw = bp * np.abs(y) ** 2
    out = pw / (pw.sum() - pw + inst.sys.noise)
    return out if k is None else float(out[k])


def sum_rate(inst, theta):
    return float(np.sum(np.log2(1.0 + sinr(inst, theta))))


def random_phase_sum_rate(inst, rng, samples=20000, batch=2000):
    """Sum rate averaged over i.i.d. uniform RIS phases for this channel draw."""
    bp = inst.sys.beta * inst.sys.P
    total = 0.0
    done = 0
    while done < samples:
        m = min(batch, samples - done)
        coeff = inst.radius * np.exp(1j * rng.uniform(-math.pi, math.pi, (m, inst.N)))
        pw = bp * np.abs(inst.b[None, :] + coeff @ inst.a.T) ** 2
        g = pw / (pw.sum(axis=1, keepdims=True) - pw + inst.sys.noise)
        total += np.log2(1.0 + g).sum()
        done += m
    return float(total / samples)


def optimal_lambda(inst, theta):
    """Stationary auxiliaries of the quadratic transform for fixed theta."""
    s = gains(inst, theta)
    return math.sqrt(inst.sys.beta * inst.sys.P) * s.real / (_interference(inst, s) + inst.sys.noise)


def transform_objective(inst, theta, lam):
    """Sum of log2(1 + 2 lam_k sqrt(bP) Re{s_k} - lam_k^2 (bP sum_{i!=k} |s_i|^2 + sigma^2))."""
    s = gains(inst, theta)
    arg = (1.0 + 2.0 * lam * math.sqrt(inst.sys.beta * inst.sys.P) * s.real
           - lam**2 * (_interference(inst, s) + inst.sys.noise))
    if np.any(arg <= 0):
        raise ValueError("nonpositive log argument: (theta, lambda) infeasible")
    return float(np.sum(np.log2(arg)))


@dataclass(frozen=True)
class QuadraticTerms:
    U: np.ndarray   # (K, N, N) Hermitian PSD
    v: np.ndarray   # (K, N)
    c: np.ndarray   # (K,)


def quadratic_terms(inst, lam):
    """U_k, v_k, c_k such that the log arguments read 1 - t^H U t + 2 Re{t^H v} + c."""
    bp = inst.sys.beta * inst.sys.P
    a, b = inst.a, inst.b
    outer = np.einsum("in,im->inm", a, np.conj(a))
    total_outer = outer.sum(axis=0)
    ab = a * np.conj(b)[:, None]
    total_ab = ab.sum(axis=0)
    b2 = np.abs(b) ** 2
    K, N = a.shape
    U = np.empty((K, N, N), dtype=complex)
    v = np.empty((K, N), dtype=complex)
    c = np.empty(K)
    for k in range(K):
        lk = lam[k]
        U[k] = lk**2 * bp * (total_outer - outer[k])
        v[k] = lk * math.sqrt(bp) * a[k] - lk**2 * bp * (total_ab - ab[k])
        c[k] = (2.0 * lk * math.sqrt(bp) * b[k].real
                - lk**2 * (bp * (b2.sum() - b2[k]) + inst.sys.noise))
    return QuadraticTerms(U, v, c)


def _log_args(terms, theta):
    quad = np.einsum("n,knm,m->k", np.conj(theta), terms.U, theta).real
    lin = (np.conj(theta)[None, :] * terms.v).sum(axis=1).real
    return 1.0 - quad + 2.0 * lin + terms.c


def surrogate_objective(terms, theta):
    arg = _log_args(terms, theta)
    if np.any(arg <= 0):
        raise ValueError("nonpositive log argument: (theta, lambda) infeasible")
    return float(np.sum(np.log2(arg)))


def surrogate_gradient(terms, theta):
    """Ascent direction 2 df/d(theta*)."""
    arg = _log_args(terms, theta)
    inner = -np.einsum("knm,m->kn", terms.U, theta) + terms.v
    return 2.0 * (inner / (arg * math.log(2.0))[:, None]).sum(axis=0)


def received_power(inst, theta):
    """Tag received power P |f_k + g_k^T Theta h|^2 for every tag."""
    return inst.sys.P * np.abs(inst.b_bar + inst.a_bar @ np.conj(theta)) ** 2


def power_gradient(inst, theta0):
    """d/d(theta*) of the received power at theta0, shape (K, N)."""
    s_bar = inst.b_bar + inst.a_bar @ np.conj(theta0)
    return inst.sys.P * inst.a_bar * np.conj(s_bar)[:, None]


def linearized_power(inst, theta_prev, theta, k=None):
    """First-order expansion of the received power around ``theta_prev``."""
    grad = power_gradient(inst, theta_prev)
    delta = np.asarray(theta) - np.asarray(theta_prev)
    lin = received_power(inst, theta_prev) + 2.0 * (np.conj(grad) * delta[None, :]).sum(axis=1).real
    return lin if k is None else float(lin[k])


def energy_threshold(sys):
    """Received power each tag needs so that (1 - beta) P_T reaches P_b / phi."""
    return sys.P_b_eff / (1.0 - sys.beta)


@dataclass(frozen=True)
class HalfSpaces:
    """Constraints Re{w_k^H theta} >= t_k."""

    w: np.ndarray
    t: np.ndarray

    @classmethod
    def empty(cls, N):
        return cls(np.zeros((0, N), dtype=complex), np.zeros(0))

    def slack(self, theta):
        return (np.conj(self.w) @ theta).real - self.t


def energy_constraints(inst, theta0):
    """Linearized activation constraints anchored at ``theta0``."""
    w = 2.0 * power_gradient(inst, theta0)
    t = energy_threshold(inst.sys) - received_power(inst, theta0) + (np.conj(w) @ theta0).real
    return HalfSpaces(w, t)


def project_disks(theta, radius):
    mag = np.abs(theta)
    scale = np.where(mag > radius, radius / np.maximum(mag, 1e-300), 1.0)
    return theta * scale


def _project_halfspace(theta, w, t):
    gap = t - (np.vdot(w, theta)).real
    if gap <= 0:
        return theta
    return theta + gap / np.vdot(w, w).real * w


def project_dykstra(theta, radius, cons, tol=1e-12, max_iter=20000):
    """Dykstra's cyclic projection onto the disks intersected with the half-spaces."""
    if cons.t.size == 0:
        return project_disks(theta, radius)
    x = theta.copy()
    n_sets = cons.t.size + 1
    incr = [np.zeros_like(x) for _ in range(n_sets)]
    for _ in range(max_iter):
        x_old = x
        for j in range(n_sets):
            y = x + incr[j]
            x = _project_halfspace(y, cons.w[j - 1], cons.t[j - 1]) if j else project_disks(y, radius)
            incr[j] = y - x
        if np.linalg.norm(x - x_old) <= tol * max(1.0, np.linalg.norm(x)):
            break
    # finish on the disks so the modulus constraint is exact
    return project_disks(x, radius)


def project_dual(theta, radius, cons):
    """Same projection through its K-dimensional dual.

    For multipliers mu >= 0 the inner minimizer is the disk projection of
    theta + sum_k mu_k w_k; the concave dual is maximized with L-BFGS-B.
    """
    if cons.t.size == 0:
        return project_disks(theta, radius)
    scale = np.linalg.norm(cons.w, axis=1)
    w = cons.w / scale[:, None]
    t = cons.t / scale

    def primal(mu):
        return project_disks(theta + mu @ w, radius)

    def neg_dual(mu):
        x = primal(mu)
        slack = (np.conj(w) @ x).real - t
        val = 0.5 * np.vdot(x - theta, x - theta).real - mu @ slack
        return -val, slack

    if np.all((np.conj(w) @ project_disks(theta, radius)).real - t >= 0):
        return project_disks(theta, radius)
    res = optimize.minimize(neg_dual, np.zeros(t.size), jac=True, method="L-BFGS-B",
                            bounds=[(0.0, None)] * t.size,
                            options={"ftol": 0.0, "gtol": 1e-13, "maxiter": 500})
    mu = res.x
    # Newton polish of the active multipliers: drive their slacks to zero
    for _ in range(50):
        active = mu > 0
        if not active.any():
            break
        z = theta + mu @ w
        x = project_disks(z, radius)
        slack = (np.conj(w) @ x).real - t
        if np.all(np.abs(slack[active]) <= 1e-14) and np.all(slack >= -1e-14):
            break
        wa = w[active]
        jac = np.array([[np.vdot(wk, _disk_jvp(z, radius, wj)).real for wj in wa] for wk in wa])
        try:
            step = np.linalg.solve(jac, -slack[active])
        except np.linalg.LinAlgError:
            break
        mu = mu.copy()
        mu[active] = np.maximum(mu[active] + step, 0.0)
    return primal(mu)


def _disk_jvp(z, radius, d):
    """Directional derivative of the disk projection at z along d."""
    mag = np.abs(z)
    clipped = mag > radius
    out = d.copy()
    zc, dc, mc = z[clipped], d[clipped], mag[clipped]
    radial = zc * (np.conj(zc) * dc).real / mc**2
    out[clipped] = radius[clipped] / mc * (dc - radial)
    return out


PROJECTIONS = {"dual": project_dual, "dykstra": project_dykstra}


def project(theta, radius, cons, method="dual"):
    return PROJECTIONS[method](theta, radius, cons)


def _feasible(theta, radius, cons, tol):
    disk_ok = np.all(np.abs(theta) <= radius * (1 + 1e-12) + 1e-15)
    scale = np.maximum(np.abs(cons.t), 1e-300)
    return disk_ok and np.all(cons.slack(theta) >= -tol * scale)


def solve_theta(inst, lam, theta_prev, cons=None, max_iter=300, tol=1e-12, feas_tol=1e-9):
    """Maximize the concave surrogate over disks and linearized half-spaces.

    Projected gradient ascent with Barzilai-Borwein steps and Armijo
    backtracking.  A candidate is accepted only if it improves the surrogate,
    so the result is never worse than ``theta_prev``.
    """
    radius = inst.radius
    if cons is None:
        cons = HalfSpaces.empty(inst.N)
    theta = np.asarray(theta_prev, dtype=complex).copy()
    if not _feasible(theta, radius, cons, feas_tol):
        raise InfeasibleError("starting point violates the constraints")
    terms = quadratic_terms(inst, lam)
    val = surrogate_objective(terms, theta)
    grad = surrogate_gradient(terms, theta)
    gnorm = np.linalg.norm(grad)
    if gnorm == 0:
        return theta
    step = float(np.max(radius)) / gnorm
    for _ in range(max_iter):
        improved = False
        trial_step = step
        for _ in range(60):
            cand = project(theta + trial_step * grad, radius, cons)
            if not _feasible(cand, radius, cons, feas_tol):
                trial_step *= 0.5
                continue
            try:
                cand_val = surrogate_objective(terms, cand)
            except ValueError:
                trial_step *= 0.5
                continue
            if cand_val > val:
                improved = True
                break
            trial_step *= 0.5
        if not improved:
            break
        new_grad = surrogate_gradient(terms, cand)
        s_vec = cand - theta
        y_vec = new_grad - grad
        sy = -np.vdot(s_vec, y_vec).real
        gain = cand_val - val
        theta, val, grad = cand, cand_val, new_grad
        step = np.vdot(s_vec, s_vec).real / sy if sy > 0 else trial_step * 2.0
        if gain <= tol * max(1.0, abs(val)):
            break
    return theta


@dataclass(frozen=True)
class OptimizerOptions:
    tol: float = 1e-4
    max_outer: int = 200
    energy_constraints: bool = True
    inner_max_iter: int = 300
    restarts: int = 4       # extra random-phase starting points
    restart_seed: int = 0


@dataclass
class SolverState:
    theta: np.ndarray
    lam: np.ndarray
    trace: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    init: str = ""

    @property
    def coefficients(self):
        return np.conj(self.theta)


def cophase_init(inst, k):
    """Coefficients co-phasing tag k's cascade with its direct path, as solver theta."""
    coeff = inst.radius * np.exp(1j * (np.angle(inst.f[k]) - np.angle(inst.a_bar[k])))
    return np.conj(coeff)


def _meets_threshold(inst, theta):
    if inst.sys.P_b == 0:
        return True
    return bool(np.all(received_power(inst, theta) >= energy_threshold(inst.sys) * (1 - 1e-12)))


def balanced_init(inst, theta, iters=100):
    """Fixed-point search for a phase vector that lifts the weakest tags.

    Each step maximizes sum_k Lin_k(theta) / P_k(theta0) over the disks, a
    linear program solved elementwise; it stops as soon as every tag is active.
    """
    for _ in range(iters):
        if _meets_threshold(inst, theta):
            break
        weights = 1.0 / np.maximum(received_power(inst, theta), 1e-300)
        direction = (weights[:, None] * power_gradient(inst, theta)).sum(axis=0)
        theta = inst.radius * np.exp(1j * np.angle(direction))
    return theta


def starting_points(inst, opts, use_energy=True):
    """Candidate starts: co-phasing each tag, theta = 0, then seeded random phases.

    With activation constraints, a candidate that leaves some tag inactive is
    first passed through ``balanced_init``; candidates that stay infeasible are
    dropped.
    """
    candidates = [(f"cophase-{k}", cophase_init(inst, k)) for k in range(inst.K)]
    candidates.append(("zero", np.zeros(inst.N, dtype=complex)))
    rng = np.random.default_rng(opts.restart_seed)
    for r in range(opts.restarts):
        candidates.append((f"random-{r}", inst.radius * np.exp(1j * rng.uniform(-math.pi, math.pi, inst.N))))
    if not use_energy:
        return candidates
    out = []
    for name, theta in candidates:
        if not _meets_threshold(inst, theta):
            theta = balanced_init(inst, theta)
            name += "+balanced"
        if _meets_threshold(inst, theta):
            out.append((name, theta))
    return out


def _run(inst, theta, init_name, opts, use_energy):
    theta = project_disks(np.asarray(theta, dtype=complex), inst.radius)
    state = SolverState(theta=theta, lam=np.zeros(inst.K), init=init_name)
    rate = sum_rate(inst, theta)
    state.trace.append(rate)
    work = inst
    for it in range(1, opts.max_outer + 1):
        s = gains(work, theta)
        work = work.rotate_readers(np.exp(-1j * np.angle(s)))
        lam = optimal_lambda(work, theta)
        cons = energy_constraints(work, theta) if use_energy else HalfSpaces.empty(inst.N)
        theta = solve_theta(work, lam, theta, cons, max_iter=opts.inner_max_iter)
        new_rate = sum_rate(inst, theta)
        state.trace.append(new_rate)
        state.theta, state.lam, state.iterations = theta, lam, it
        gain = (new_rate - rate) / max(abs(rate), 1e-300)
        rate = new_rate
        if gain < opts.tol:
            state.converged = True
            break
    return state


def optimize_phases(inst, options=None, theta0=None):
    """Alternate the closed-form auxiliary update with the constrained theta step.

    Before each auxiliary update every reader phase u_k is rotated so that the
    desired term b_k + theta^H a_k is real and positive.  This does not change
    any SINR, makes the transform tight at the current point, and hence the
    recorded sum-rate trace is nondecreasing.

    The activation constraints make the problem nonconvex, so the iteration
    is run from every starting point and the best converged run is returned.
    ``theta0`` gives a single warm start instead.
    """
    opts = options or OptimizerOptions()
    use_energy = opts.energy_constraints and inst.sys.P_b > 0
    if theta0 is not None:
        if use_energy and not _meets_threshold(inst, theta0):
            raise InfeasibleError("warm start does not activate every tag")
        return _run(inst, theta0, "warm", opts, use_energy)
    starts = starting_points(inst, opts, use_energy)
    if not starts:
        raise InfeasibleError("no starting phase vector activates every tag")
    best = None
    for name, theta in starts:
        state = _run(inst, theta, name, opts, use_energy)
        if best is None or state.trace[-1] > best.trace[-1]:
            best = state
    return best
