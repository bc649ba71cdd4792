"""Energy landscape of a single hidden node.

For a task with one-hot inputs X and target matrix T the energy of a weight
vector w is ℰ(w) = ½‖Tᵀ(r ∘ σ(Xw))‖², with T = Ỹ (centered targets) for
ordinary tasks. Local maxima on the unit sphere are the features a node
learns independently; this module finds and classifies them.
"""
import logging
from dataclasses import dataclass, field
from functools import partial
from typing import Iterable, Literal, Optional, Protocol, Sequence

import numpy as np
import scipy.linalg
from scipy.optimize import brentq

from .activations import Activation
from .errors import UnconvergedError, WeightError
from .groupkit import Group, IrrepCatalog, complement_projector, pair_projector
from .numkit import derive_rng, sym_eigvals
from .schemas import AscentConfig
from .taskgen import Dataset, PairTable, WeightedPairs, center_rows, full_task, one_hot_pairs
from .workers import run_pool

logger = logging.getLogger(__name__)

SINGLE_IRREP_MASS = 0.99
FLATNESS_STEP = 1e-4
PROBES = 16
PROBE_RADIUS = 0.05
RETURN_ANGLE = 0.1


class Objective(Protocol):
    group: Group
    activation: Activation

    def value(self, w: np.ndarray) -> float: ...

    def grad(self, w: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True, eq=False)
class Task:
    """Energy ℰ(w) = ½‖Tᵀ(r∘σ(Xw))‖² − ½·debias·Σσ(Xw)²"""
    X: np.ndarray
    Y: np.ndarray
    T: np.ndarray
    activation: Activation
    group: Group
    weights: Optional[np.ndarray] = None
    keep_p: Optional[float] = None
    debias: float = 0.0

    @property
    def M(self) -> int:
        return self.group.order

    def value(self, w: np.ndarray) -> float:
        return energy(w, self)

    def grad(self, w: np.ndarray) -> np.ndarray:
        return energy_grad(w, self)


def task_from_rows(group: Group, rows: np.ndarray, activation: Activation) -> Task:
    X, Y = one_hot_pairs(group, rows)
    return Task(X=X, Y=Y, T=center_rows(Y), activation=activation, group=group)


def full_energy_task(group: Group, activation: Activation) -> Task:
    return task_from_rows(group, full_task(group).rows, activation)


def dataset_task(dataset: Dataset, activation: Activation) -> Task:
    """Energy over the training rows of a split"""
    return task_from_rows(dataset.group, dataset.table.rows[dataset.train_idx], activation)


def weighted_task(pairs: WeightedPairs, activation: Activation) -> Task:
    """ℰ = ½(Σ_g p_g σ(u_g + v_{g⁻¹h}))²; one target column, so no centering"""
    X, Y = one_hot_pairs(pairs.group, pairs.rows)
    return Task(X=X, Y=Y, T=Y, activation=activation, group=pairs.group, weights=pairs.weights)


def ht_task(table: PairTable, keep: np.ndarray, p: float, activation: Activation) -> Task:
    """Horvitz-Thompson estimate of the full-task energy from rows kept with probability p"""
    if not 0.0 < p <= 1.0:
        raise WeightError(f"keep probability must be in (0, 1], got {p}")
    keep = np.asarray(keep)
    idx = np.flatnonzero(keep) if keep.dtype == bool else keep
    group = table.group
    M = group.order
    X, Y = one_hot_pairs(group, table.rows[idx])
    return Task(
        X=X,
        Y=Y,
        T=(Y - 1.0 / M) / p,
        activation=activation,
        group=group,
        keep_p=p,
        debias=(1.0 - 1.0 / M) * (1.0 - p) / p**2,
    )


def energy(w: np.ndarray, task: Task) -> float:
    f = task.activation(task.X @ w)
    rf = f if task.weights is None else task.weights * f
    z = task.T.T @ rf
    value = 0.5 * float(z @ z)
    if task.debias:
        value -= 0.5 * task.debias * float(f @ f)
    return value


def energy_grad(w: np.ndarray, task: Task) -> np.ndarray:
    """XᵀD(w)ỸỸᵀσ(Xw), with row weights and the debias term when present"""
    Z = task.X @ w
    f = task.activation(Z)
    d = task.activation.deriv(Z)
    if task.weights is None:
        back = task.T @ (task.T.T @ f)
    else:
        back = task.weights * (task.T @ (task.T.T @ (task.weights * f)))
    if task.debias:
        back = back - task.debias * f
    return task.X.T @ (d * back)


@dataclass(frozen=True, eq=False)
class ModulatedObjective:
    """ℰ_S(w) = ½ zᵀΠ_S z with z = Yᵀσ(Xw) and Π_S summing the unsuppressed nontrivial projectors"""
    task: Task
    projector: np.ndarray
    suppressed: tuple[int, ...] = ()

    @property
    def group(self) -> Group:
        return self.task.group

    @property
    def activation(self) -> Activation:
        return self.task.activation

    def value(self, w: np.ndarray) -> float:
        z = self.task.Y.T @ self.task.activation(self.task.X @ w)
        return 0.5 * float(z @ (self.projector @ z))

    def grad(self, w: np.ndarray) -> np.ndarray:
        Z = self.task.X @ w
        z = self.task.Y.T @ self.task.activation(Z)
        back = self.task.Y @ (self.projector @ z)
        return self.task.X.T @ (self.task.activation.deriv(Z) * back)


def modulated_objective(task: Task, suppressed: Iterable[int], catalog: IrrepCatalog) -> ModulatedObjective:
    suppressed = tuple(sorted(set(suppressed)))
    projector = complement_projector(catalog, task.group, suppressed)
    return ModulatedObjective(task=task, projector=projector, suppressed=suppressed)


def modulated_energy(w: np.ndarray, task: Task, suppressed: Iterable[int], catalog: IrrepCatalog) -> tuple[float, np.ndarray]:
    objective = modulated_objective(task, suppressed, catalog)
    return objective.value(w), objective.grad(w)


# Ascent and classification
@dataclass
class Classification:
    label: Optional[int] = None
    masses: dict[int, float] = field(default_factory=dict)
    c_max: float = float("nan")
    sign: int = 0
    struct_residual: float = float("nan")
    theory_energy: float = float("nan")
    single_irrep: bool = False
    flagged: bool = False


@dataclass
class FlatnessReport:
    lam_min_abs: float
    lam_max: float
    lam_scale: float


@dataclass
class AscentResult:
    w: np.ndarray
    energy: float
    steps: int
    grad_norm: float
    converged: bool
    seed: Optional[int] = None
    classification: Optional[Classification] = None
    flatness: Optional[FlatnessReport] = None

    @property
    def u(self) -> np.ndarray:
        return self.w[: self.w.shape[0] // 2]

    @property
    def v(self) -> np.ndarray:
        return self.w[self.w.shape[0] // 2 :]


def tangential(w: np.ndarray, g: np.ndarray) -> np.ndarray:
    return g - float(w @ g) * w


def ascend(w0: np.ndarray, objective: Objective, cfg: Optional[AscentConfig] = None) -> AscentResult:
    """Projected gradient ascent on the unit sphere with step halving"""
    cfg = cfg or AscentConfig()
    norm = np.linalg.norm(w0)
    if norm == 0.0:
        raise ValueError("ascent needs a nonzero starting point")
    w = np.asarray(w0, dtype=np.float64) / norm
    E = objective.value(w)
    g = objective.grad(w)
    steps = 0
    converged = False
    for _ in range(cfg.max_steps):
        t_norm = float(np.linalg.norm(tangential(w, g)))
        if t_norm <= cfg.tol:
            converged = True
            break
        lr = cfg.lr
        accepted = False
        for _ in range(cfg.max_halvings + 1):
            cand = w + lr * g
            cand /= np.linalg.norm(cand)
            E_cand = objective.value(cand)
            # rounding slack only; real decreases trigger halving
            if E_cand >= E - 1e-14 * max(1.0, abs(E)):
                accepted = True
                break
            lr *= 0.5
        if not accepted:
            break
        w, E = cand, E_cand
        g = objective.grad(w)
        steps += 1
    grad_norm = float(np.linalg.norm(tangential(w, g)))
    converged = converged or grad_norm <= cfg.tol
    if not converged:
        logger.debug("Ascent stopped after %d steps with tangential gradient %.3g", steps, grad_norm)
    return AscentResult(w=w, energy=E, steps=steps, grad_norm=grad_norm, converged=converged)


def quadratic_scale(activation: Optional[Activation]) -> Optional[float]:
    """c² for σ(x) = c·x², None for any other activation"""
    if activation is None or activation.kind == "quadratic":
        return 1.0
    if activation.kind == "linear_quadratic" and activation.a == 0.0:
        return activation.b**2
    return None


def theory_energy(catalog: IrrepCatalog, label: int, M: int, scale: float = 1.0) -> float:
    """Maximum of ℰ for σ(x) = c·x² with scale = c²: c²M/2d (real irrep), c²M/4d (complex pair).

    The cross term of (u_i + v_j)² carries a factor 2, so σ = x²/2 gives M/8d and M/16d.
    """
    irrep = catalog[label]
    if irrep.kind == "trivial":
        return 0.0
    return scale * M / ((2 if irrep.kind == "real" else 4) * irrep.dim)


def structure_residual(u: np.ndarray, v: np.ndarray, catalog: IrrepCatalog, group: Group, sign: int) -> float:
    """Distance of v from the orbit of sign·Pu that leaves the energy unchanged.

    On a complex pair the energy only sees the joint magnitude of the pair's
    coefficients, so any phase rotation of Pu inside that plane is an equally
    good maximum; there only the norms are compared. Real and trivial
    components must match sign·Pu exactly.
    """
    Pu = u[group.inverse]
    diff = v - sign * Pu
    real_part = diff.copy()
    total = 0.0
    for label in catalog.merged_labels():
        if catalog[label].kind != "complex":
            continue
        proj = pair_projector(catalog, label, group)
        real_part -= proj @ diff
        total += (np.linalg.norm(proj @ v) - np.linalg.norm(proj @ Pu)) ** 2
    return float(np.sqrt(total + float(real_part @ real_part)))


def classify_maximum(
    w: np.ndarray,
    catalog: Optional[IrrepCatalog],
    group: Group,
    activation: Optional[Activation] = None,
) -> Classification:
    """Isotypic masses c_k = ‖Π_k u‖² + ‖Π_k v‖² with conjugate pairs merged"""
    if catalog is None:
        return Classification(flagged=True)
    M = group.order
    u, v = w[:M], w[M:]
    masses: dict[int, float] = {}
    for label in catalog.merged_labels():
        proj = pair_projector(catalog, label, group)
        masses[label] = float(np.sum((proj @ u) ** 2) + np.sum((proj @ v) ** 2))
    Pu = u[group.inverse]
    plus, minus = np.linalg.norm(v - Pu), np.linalg.norm(v + Pu)
    result = Classification(
        masses=masses,
        sign=1 if plus <= minus else -1,
        struct_residual=min(structure_residual(u, v, catalog, group, s) for s in (1, -1)),
    )
    if masses:
        label = max(masses, key=lambda k: (masses[k], -k))
        result.label = label
        result.c_max = masses[label]
        scale = quadratic_scale(activation)
        if scale is not None:
            result.theory_energy = theory_energy(catalog, label, M, scale)
        result.single_irrep = result.c_max >= SINGLE_IRREP_MASS
    return result


def _tangent_basis(w: np.ndarray) -> np.ndarray:
    return scipy.linalg.null_space(w[None, :])


def flatness(w: np.ndarray, objective: Objective, step: float = FLATNESS_STEP) -> FlatnessReport:
    """Extremes of the sphere-projected Hessian by central differences of the tangential gradient"""
    w = np.asarray(w, dtype=np.float64)
    g = objective.grad(w)
    if np.linalg.norm(tangential(w, g)) > 1e-6 * max(1.0, float(np.linalg.norm(g))):
        raise UnconvergedError("flatness needs a converged maximum")
    B = _tangent_basis(w)

    def chart_grad(xi: np.ndarray) -> np.ndarray:
        x = w + B @ xi
        r = np.linalg.norm(x)
        x_hat = x / r
        return B.T @ tangential(x_hat, objective.grad(x_hat)) / r

    n = B.shape[1]
    H = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = step
        H[:, j] = (chart_grad(e) - chart_grad(-e)) / (2 * step)
    eig = sym_eigvals(0.5 * (H + H.T))
    abs_eig = np.abs(eig)
    return FlatnessReport(
        lam_min_abs=float(abs_eig.min()),
        lam_max=float(eig.max()),
        lam_scale=float(abs_eig.max()),
    )


def initial_point(rng: np.random.Generator, dim: int, init: Literal["normal", "positive"] = "normal") -> np.ndarray:
    w0 = rng.normal(size=dim)
    return np.abs(w0) if init == "positive" else w0


def _ascend_seed(
    seed: int,
    objective: Objective,
    cfg: AscentConfig,
    catalog: Optional[IrrepCatalog],
    init: str,
    with_flatness: bool,
) -> AscentResult:
    rng = derive_rng(seed)
    result = ascend(initial_point(rng, 2 * objective.group.order, init), objective, cfg)
    result.seed = seed
    result.classification = classify_maximum(result.w, catalog, objective.group, objective.activation)
    if with_flatness and result.converged:
        try:
            result.flatness = flatness(result.w, objective)
        except UnconvergedError:
            result.flatness = None
    return result


def ascend_many(
    objective: Objective,
    seeds: Sequence[int],
    cfg: Optional[AscentConfig] = None,
    catalog: Optional[IrrepCatalog] = None,
    workers: int = 1,
    init: Literal["normal", "positive"] = "normal",
    with_flatness: bool = False,
) -> list[AscentResult]:
    """One classified ascent per seed, returned in seed order"""
    job = partial(_ascend_seed, objective=objective, cfg=cfg or AscentConfig(), catalog=catalog, init=init, with_flatness=with_flatness)
    results = run_pool(job, list(seeds), workers=workers, desc="ascent")
    converged = sum(r.converged for r in results)
    logger.info("Ascent on %s: %d/%d seeds converged", objective.group.name, converged, len(results))
    return results


def interpolation_dip(w_a: np.ndarray, w_b: np.ndarray, objective: Objective, points: int = 41) -> float:
    """Relative drop of the path minimum below the lower endpoint along the renormalized segment"""
    ends = min(objective.value(w_a), objective.value(w_b))
    lowest = ends
    for t in np.linspace(0.0, 1.0, points)[1:-1]:
        x = (1 - t) * w_a + t * w_b
        r = np.linalg.norm(x)
        if r < 1e-12:
            return 1.0
        lowest = min(lowest, objective.value(x / r))
    if ends <= 0:
        return 0.0
    return float((ends - lowest) / ends)


# Memorization
@dataclass
class MemorizationProfile:
    activation: str
    monotonicity: Optional[Literal["nondecreasing", "strictly-decreasing"]]
    s: Optional[np.ndarray] = None
    lam: Optional[float] = None
    kind: Optional[Literal["focused", "spreading"]] = None
    flagged: bool = False


PHI_X_MIN = 1e-12
PHI_GRID = np.logspace(-6, np.log10(np.sqrt(2.0)), 400)


def phi_monotonicity(activation: Activation) -> Optional[str]:
    phi = activation.phi(PHI_GRID)
    d = np.diff(phi)
    scale = max(1.0, float(np.abs(phi).max()))
    if np.all(d >= -1e-12 * scale):
        return "nondecreasing"
    if np.all(d < 0):
        return "strictly-decreasing"
    return None


def _phi_inverse(activation: Activation, y: float, x_max: float) -> float:
    """x in [0, x_max] with φ(x) = y for strictly decreasing φ"""
    if y >= float(activation.phi(PHI_X_MIN)):
        return 0.0
    if y <= float(activation.phi(x_max)):
        return x_max
    return brentq(lambda x: float(activation.phi(x)) - y, PHI_X_MIN, x_max, xtol=1e-15, rtol=1e-14)


def memorization_profile(p: Sequence[float], activation: Activation) -> MemorizationProfile:
    """KKT optimum of Σ p_g σ(s_g) subject to Σ s_g² = 2"""
    p = np.asarray(p, dtype=np.float64)
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise WeightError("memorization weights must be nonnegative and sum to 1")
    mono = phi_monotonicity(activation)
    if mono is None:
        logger.warning("φ = σ'(x)/x is not monotone for %s; no profile", activation.kind)
        return MemorizationProfile(activation=activation.kind, monotonicity=None, flagged=True)

    root2 = np.sqrt(2.0)
    if mono == "nondecreasing":
        s = np.zeros_like(p)
        top = int(np.argmax(p))
        s[top] = root2
        lam = 0.5 * p[top] * float(activation.phi(root2))
        return MemorizationProfile(activation.kind, mono, s, lam, "focused")

    positive = p > 0

    def profile(lam: float) -> np.ndarray:
        s = np.zeros_like(p)
        s[positive] = [_phi_inverse(activation, 2 * lam / pg, root2) for pg in p[positive]]
        return s

    p_max = p.max()
    lam_lo = 0.5 * p_max * float(activation.phi(root2))
    lam_hi = 0.5 * p_max * float(activation.phi(PHI_X_MIN))
    lam = brentq(lambda lam: float(np.sum(profile(lam) ** 2)) - 2.0, lam_lo, lam_hi, xtol=1e-300, rtol=1e-14, maxiter=500)
    s = profile(lam)
    s *= np.sqrt(2.0 / np.sum(s**2))
    return MemorizationProfile(activation.kind, mono, s, float(lam), "spreading")


def profile_weight(pairs: WeightedPairs, s: np.ndarray) -> np.ndarray:
    """Unit weight vector realizing s: u_g = v_{g⁻¹h} = s_g/2"""
    M = pairs.group.order
    w = np.zeros(2 * M)
    w[pairs.rows[:, 0]] = s / 2
    w[M + pairs.rows[:, 1]] = s / 2
    return w


def pair_sums(pairs: WeightedPairs, w: np.ndarray) -> np.ndarray:
    """s_g = u_g + v_{g⁻¹h}"""
    M = pairs.group.order
    return w[pairs.rows[:, 0]] + w[M + pairs.rows[:, 1]]


# Stability under subsampling
@dataclass
class StabilityVerdict:
    stable: bool
    leak_margin: float
    angles: list[float]
    labels: list[Optional[int]]
    radius: float = PROBE_RADIUS
    return_angle: float = RETURN_ANGLE


def _component_projector(catalog: IrrepCatalog, label: int, group: Group) -> np.ndarray:
    proj = pair_projector(catalog, label, group)
    return scipy.linalg.block_diag(proj, proj)


def vertex_stability(
    w_star: np.ndarray,
    task_sub: Task,
    catalog: IrrepCatalog,
    seed: int = 0,
    cfg: Optional[AscentConfig] = None,
    probes: int = PROBES,
    radius: float = PROBE_RADIUS,
    return_angle: float = RETURN_ANGLE,
) -> StabilityVerdict:
    """Re-ascend the subsampled energy from tangential perturbations of a full-task vertex"""
    group = task_sub.group
    base = classify_maximum(w_star, catalog, group)
    if base.label is None:
        raise UnconvergedError("vertex_stability needs a classified maximum")
    Q = _component_projector(catalog, base.label, group)
    rng = derive_rng(seed, 1)
    E_star = task_sub.value(w_star)

    stable = True
    margin = -np.inf
    angles: list[float] = []
    labels: list[Optional[int]] = []
    for _ in range(probes):
        delta = tangential(w_star, rng.normal(size=w_star.shape[0]))
        delta *= radius / np.linalg.norm(delta)
        result = ascend(w_star + delta, task_sub, cfg)
        inside = min(1.0, float(np.linalg.norm(Q @ result.w)))
        angle = float(np.arccos(inside))
        label = classify_maximum(result.w, catalog, group).label
        angles.append(angle)
        labels.append(label)
        if angle > return_angle or label != base.label:
            stable = False

        leak = delta - Q @ delta
        leak_norm = np.linalg.norm(leak)
        if leak_norm > 1e-12:
            moved = w_star + leak
            margin = max(margin, (task_sub.value(moved / np.linalg.norm(moved)) - E_star) / leak_norm)
    return StabilityVerdict(stable=stable, leak_margin=float(margin), angles=angles, labels=labels, radius=radius, return_angle=return_angle)
