"""Exact adversary evaluation for the bounded-storage guessing game.

The game: Alice measures her half of sigma_AB^(x)n in uniformly random bases
theta and later announces theta; Bob, who received the B halves but may keep
only a d-dimensional quantum memory (plus unlimited classical notes), must
output a guess y with d_H(x, y) <= floor(gamma n).

For a concrete encoding strategy the winning probability is computed
exactly: for every theta the post-measurement ensemble on Bob's memory is
built branch by classical branch, and the optimal decoding is a quantum
state discrimination problem solved by a fixed-point iteration with a dual
certificate (eigenvalue lifting), so every reported value comes with a
certified optimality gap. Closed forms are used where they exist (scalar
memories, two-outcome Helstrom).

The module also hosts the see-saw encoding search (a heuristic lower bound
on the game value) and the three fuzzed inequality verifiers backing the
security statement: the key-lemma bound itself, the norm-of-sum inequality,
and the per-block overlap bounds.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .bounds import bound_imperfect
from .errors import DimensionCapError, DomainError, ShapeError, StrategyError
from .jordan import BinaryMeasurement, epsilon_plus_direct
from .matcore import (
    Array,
    RandomSuite,
    as_matrix,
    check_density_operator,
    child_seed,
    dagger,
    induced_norm,
    operator_norm,
    partial_trace,
    psd_sqrt,
    trace_norm,
)
from .protocols import DeviceModel, ideal_bb84_device

__all__ = [
    "MeasureAll",
    "StoreSubset",
    "GeneralEncoding",
    "breidbart",
    "GuessResult",
    "DiscriminationResult",
    "PostMeasurementEnsemble",
    "post_measurement_ensemble",
    "optimal_discrimination",
    "exact_win_probability",
    "replay_win_probability",
    "seesaw_search",
    "random_qubit_device",
    "random_rotated_ideal_device",
    "strategy_family",
    "strategy_from_obj",
    "verify_key_lemma",
    "verify_norm_lemma",
    "verify_overlap_lemma",
    "VerificationReport",
]

BREIDBART_ANGLE = math.pi / 8

_GAME_CAP_ROUNDS = 6
_ENCODING_CAP_ROUNDS = 3


def _basis_bra(angle: float) -> tuple[Array, Array]:
    """Row-vector bras of the qubit basis at ``angle`` from the Z axis."""
    c, s = math.cos(angle), math.sin(angle)
    return (np.array([[c, s]], dtype=complex),
            np.array([[-s, c]], dtype=complex))


# ---------------------------------------------------------------------------
# attack strategies: each yields per-classical-outcome Kraus lists B^(x)n -> memory
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MeasureAll:
    """Measure every round immediately in a fixed basis; keep only the record.

    ``angles`` gives one qubit measurement angle per round (a single float is
    broadcast); the Breidbart angle pi/8 is the classic instance. Quantum
    memory used: none (dimension 1).
    """

    angles: tuple[float, ...]
    kind: str = field(default="measure_all", init=False)

    def memory_dim(self, dim_b: int, n: int) -> int:
        return 1

    def kraus_branches(self, dim_b: int, n: int) -> list[list[Array]]:
        if dim_b != 2:
            raise StrategyError("measure_all is parameterized for qubit wires only")
        angles = self.angles if len(self.angles) == n else tuple(self.angles) * n
        if len(angles) != n:
            raise StrategyError(f"need {n} angles, got {len(self.angles)}")
        per_round = [_basis_bra(a) for a in angles]
        branches = []
        for outcome in itertools.product((0, 1), repeat=n):
            e = np.array([[1.0]], dtype=complex)
            for k, m in enumerate(outcome):
                e = np.kron(e, per_round[k][m])
            branches.append([e])
        return branches

    def to_obj(self) -> dict:
        return {"kind": self.kind, "angles": list(self.angles)}


@dataclass(frozen=True)
class StoreSubset:
    """Keep the rounds in ``keep`` in quantum memory, measure out the rest.

    The kept factors must fit the memory (product of their dimensions <= d is
    checked at evaluation time); discarded rounds are measured at ``angles``.
    """

    keep: tuple[int, ...]
    angles: tuple[float, ...] = ()
    kind: str = field(default="store_subset", init=False)

    def memory_dim(self, dim_b: int, n: int) -> int:
        return dim_b ** len(self.keep)

    def kraus_branches(self, dim_b: int, n: int) -> list[list[Array]]:
        keep = set(self.keep)
        if any(k < 0 or k >= n for k in keep):
            raise StrategyError(f"keep indices {sorted(keep)} out of range for n={n}")
        discarded = [k for k in range(n) if k not in keep]
        if discarded and dim_b != 2:
            raise StrategyError("measured-out rounds are parameterized for qubits only")
        angles = self.angles if len(self.angles) == len(discarded) \
            else tuple(self.angles or (BREIDBART_ANGLE,)) * len(discarded)
        angles = angles[:len(discarded)]
        bras = {k: _basis_bra(a) for k, a in zip(discarded, angles)}
        branches = []
        for outcome in itertools.product((0, 1), repeat=len(discarded)):
            picks = dict(zip(discarded, outcome))
            e = np.array([[1.0]], dtype=complex)
            for k in range(n):
                factor = np.eye(dim_b, dtype=complex) if k in keep \
                    else bras[k][picks[k]]
                e = np.kron(e, factor)
            branches.append([e])
        return branches

    def to_obj(self) -> dict:
        return {"kind": self.kind, "keep": list(self.keep), "angles": list(self.angles)}


@dataclass(frozen=True)
class GeneralEncoding:
    """Explicit quantum instrument: one completely-positive map per outcome.

    ``kraus`` lists, per classical outcome, the operation elements mapping
    B^(x)n into the memory space; jointly they must be trace preserving.
    """

    kraus: tuple[tuple[Array, ...], ...]
    kind: str = field(default="general_encoding", init=False)

    def memory_dim(self, dim_b: int, n: int) -> int:
        return int(self.kraus[0][0].shape[0])

    def kraus_branches(self, dim_b: int, n: int) -> list[list[Array]]:
        dim_in = dim_b ** n
        total = None
        for branch in self.kraus:
            for e in branch:
                e = as_matrix(e)
                if e.shape[1] != dim_in:
                    raise ShapeError(
                        f"Kraus input dimension {e.shape[1]} != {dim_in}")
                total = dagger(e) @ e if total is None else total + dagger(e) @ e
        if total is None or np.max(np.abs(total - np.eye(dim_in))) > 1e-9:
            raise StrategyError("encoding is not trace preserving within 1e-9")
        return [[as_matrix(e) for e in branch] for branch in self.kraus]

    def to_obj(self) -> dict:
        from .matcore import matrix_to_obj
        return {"kind": self.kind,
                "kraus": [[matrix_to_obj(e) for e in branch] for branch in self.kraus]}

    @staticmethod
    def from_isometry(v: Array, d: int) -> "GeneralEncoding":
        """Split an isometry into C^d (x) C^M as M single-Kraus branches."""
        v = as_matrix(v)
        if v.shape[0] % d != 0:
            raise ShapeError("isometry rows must be divisible by the memory dimension")
        m_count = v.shape[0] // d
        rows = v.reshape(d, m_count, v.shape[1])
        return GeneralEncoding(tuple(
            (rows[:, m, :].copy(),) for m in range(m_count)))


Strategy = MeasureAll | StoreSubset | GeneralEncoding


def breidbart(n: int) -> MeasureAll:
    """The intermediate-basis intercept attack, one pi/8 measurement per round."""
    return MeasureAll(angles=(BREIDBART_ANGLE,) * n)


def strategy_from_obj(obj: dict) -> Strategy:
    from .matcore import matrix_from_obj
    kind = obj.get("kind")
    if kind == "measure_all":
        return MeasureAll(angles=tuple(float(a) for a in obj["angles"]))
    if kind == "store_subset":
        return StoreSubset(keep=tuple(int(k) for k in obj["keep"]),
                           angles=tuple(float(a) for a in obj.get("angles", ())))
    if kind == "general_encoding":
        return GeneralEncoding(tuple(
            tuple(matrix_from_obj(e) for e in branch) for branch in obj["kraus"]))
    raise DomainError(f"unknown strategy kind {kind!r}")


# ---------------------------------------------------------------------------
# post-measurement ensembles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PostMeasurementEnsemble:
    """Bob's side of the game after Alice measured with input ``theta``.

    ``branch_ops[m][x]`` is the unnormalized memory operator for classical
    outcome m and Alice outcome x; its trace is the joint probability of
    (x, m). ``q[x]`` marginalizes the branches.
    """

    theta: tuple[int, ...]
    branch_ops: list[list[Array]]
    q: np.ndarray

    @property
    def n_outcomes(self) -> int:
        return len(self.q)

    def branch_states(self, x: int) -> list[tuple[float, Array]]:
        """Normalized conditional memory states per branch given outcome x."""
        out = []
        for ops in self.branch_ops:
            p = float(np.trace(ops[x]).real)
            if p > 1e-15:
                out.append((p / max(self.q[x], 1e-300), ops[x] / p))
        return out


def _conditional_b_ops(device: DeviceModel, theta: tuple[int, ...]) -> list[Array]:
    """Unnormalized B^(x)n operators conditioned on each Alice outcome string."""
    dims = [device.dim_a, device.dim_b]
    per_round = []
    for t in theta:
        meas = device.alice_measurement(t)
        conds = []
        for p in (meas.p0, meas.p1):
            op = partial_trace(np.kron(p, np.eye(device.dim_b)) @ device.sigma_ab,
                               dims, [1])
            conds.append(op)
        per_round.append(conds)
    ops = []
    for x_bits in itertools.product((0, 1), repeat=len(theta)):
        op = np.array([[1.0]], dtype=complex)
        for k, xk in enumerate(x_bits):
            op = np.kron(op, per_round[k][xk])
        ops.append(op)
    return ops


def post_measurement_ensemble(device: DeviceModel, strategy: Strategy,
                              n: int, theta) -> PostMeasurementEnsemble:
    """Apply the strategy's instrument to the conditional states for ``theta``."""
    theta = tuple(int(t) for t in theta)
    if len(theta) != n:
        raise ShapeError(f"theta must have length {n}")
    _check_caps(strategy, n)
    rho_x = _conditional_b_ops(device, theta)
    branches = strategy.kraus_branches(device.dim_b, n)
    branch_ops = []
    for kraus in branches:
        ops = []
        for rho in rho_x:
            w = sum(e @ rho @ dagger(e) for e in kraus)
            ops.append(np.asarray(w, dtype=complex))
        branch_ops.append(ops)
    q = np.array([float(np.trace(r).real) for r in rho_x])
    total = q.sum()
    if abs(total - 1.0) > 1e-10:
        raise DomainError(f"outcome probabilities sum to {total!r}")
    return PostMeasurementEnsemble(theta=theta, branch_ops=branch_ops, q=q)


def _check_caps(strategy: Strategy, n: int) -> None:
    cap = _ENCODING_CAP_ROUNDS if isinstance(strategy, GeneralEncoding) \
        else _GAME_CAP_ROUNDS
    if n > cap:
        raise DimensionCapError(
            f"{strategy.kind} evaluation is capped at n <= {cap}, got {n}")


# ---------------------------------------------------------------------------
# optimal discrimination with dual certificates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DiscriminationResult:
    win_prob: float
    upper_bound: float
    dual_gap: float
    povm: list[Array]
    converged: bool


def _helstrom_pair(g0: Array, g1: Array) -> DiscriminationResult:
    """Closed-form two-operator discrimination with an exact dual."""
    delta = g0 - g1
    value = 0.5 * float((np.trace(g0) + np.trace(g1)).real + trace_norm(delta))
    w, v = np.linalg.eigh((delta + dagger(delta)) / 2)
    pos = v[:, w > 0]
    f0 = pos @ dagger(pos) if pos.size else np.zeros_like(delta)
    f1 = np.eye(delta.shape[0]) - f0
    achieved = float((np.trace(f0 @ g0) + np.trace(f1 @ g1)).real)
    return DiscriminationResult(win_prob=achieved, upper_bound=value,
                                dual_gap=max(0.0, value - achieved),
                                povm=[f0, f1], converged=True)


def _dual_upper(g: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Feasible dual values from the lift Y = herm(sum_y G_y F_y) + max(0,mu) I."""
    d = g.shape[-1]
    z = np.einsum("bkij,bkjl->bil", g, f)
    y0 = (z + np.conj(np.transpose(z, (0, 2, 1)))) / 2
    excess = np.linalg.eigvalsh(g - y0[:, None, :, :])
    mu = np.clip(excess[:, :, -1].max(axis=1), 0.0, None)
    return np.einsum("bii->b", y0).real + mu * d


@lru_cache(maxsize=None)
def _hermitian_basis(dim: int) -> np.ndarray:
    """Orthonormal real basis of Hermitian dim x dim matrices, tr(Ba Bb) = delta."""
    basis = []
    for i in range(dim):
        e = np.zeros((dim, dim), dtype=complex)
        e[i, i] = 1.0
        basis.append(e)
    inv_sqrt2 = 1.0 / math.sqrt(2.0)
    for i in range(dim):
        for j in range(i + 1, dim):
            e = np.zeros((dim, dim), dtype=complex)
            e[i, j] = e[j, i] = inv_sqrt2
            basis.append(e)
            e = np.zeros((dim, dim), dtype=complex)
            e[i, j] = 1j * inv_sqrt2
            e[j, i] = -1j * inv_sqrt2
            basis.append(e)
    return np.stack(basis)


def _ipm_single(g: np.ndarray, gap_target: float) -> tuple[float, float, np.ndarray]:
    """Central-path solver for min tr(Y) s.t. Y >= G_y on one small problem.

    Newton steps on the log-det barrier; at parameter t the matrices
    F_y = (1/t)(Y - G_y)^{-1} form an (almost) exact POVM with duality gap
    k*dim/t, so driving t past k*dim/gap_target certifies the target. The
    returned POVM is repaired to sum to the identity exactly, and the upper
    bound comes from the (lifted) dual operator, so both sides stay sound
    independently of solver accuracy.
    """
    k, dim, _ = g.shape
    basis = _hermitian_basis(dim)
    m = basis.shape[0]
    eye = np.eye(dim, dtype=complex)
    lam0 = max(float(np.linalg.eigvalsh(gy)[-1]) for gy in g)
    if lam0 <= 0.0:
        return 0.0, 0.0, np.broadcast_to(eye / k, g.shape).copy()
    y = (lam0 + 1.0) * eye
    t = max(1.0, k * dim)
    t_final = 4.0 * k * dim / max(gap_target, 1e-12)
    grad_eye = np.array([float(np.trace(b).real) for b in basis])
    while True:
        for _ in range(40):
            slacks = y[None] - g
            inv = np.linalg.inv(slacks)
            inv = (inv + np.conj(np.transpose(inv, (0, 2, 1)))) / 2
            grad = t * grad_eye - np.einsum("aij,yji->a", basis, inv).real
            bp = np.einsum("yij,ajk,ykl->yail", inv, basis, inv)
            hess = np.einsum("bij,yaji->ab", basis, bp).real
            hess = (hess + hess.T) / 2 + 1e-13 * np.eye(m)
            try:
                delta = -np.linalg.solve(hess, grad)
            except np.linalg.LinAlgError:
                break
            decrement = float(-grad @ delta)
            if decrement <= 1e-11:
                break
            dy = np.einsum("a,aij->ij", delta, basis)
            step = 1.0
            for _ in range(60):
                trial = y + step * dy
                if float(np.linalg.eigvalsh(trial[None] - g).min()) > 0.0:
                    break
                step *= 0.5
            else:
                break
            y = y + step * dy
            if step == 1.0 and decrement < 1e-10:
                break
        if t >= t_final:
            break
        t = min(t * 20.0, t_final)
    slacks = y[None] - g
    inv = np.linalg.inv(slacks)
    inv = (inv + np.conj(np.transpose(inv, (0, 2, 1)))) / 2
    f = inv / t
    total = f.sum(axis=0)
    w, v = np.linalg.eigh(total)
    fix = (v / np.sqrt(np.clip(w, 1e-300, None))) @ np.conj(v.T)
    f = fix[None] @ f @ fix[None]
    lower = float(np.einsum("yij,yji->", f, g).real)
    mu = max(0.0, float(np.linalg.eigvalsh(g - y[None]).max()))
    upper = float(np.trace(y).real) + mu * dim
    return lower, upper, f


def _discriminate_batch(g: np.ndarray, tol: float = 1e-9,
                        max_iter: int = 10_000, dual_every: int = 1,
                        refine: bool = True,
                        ) -> tuple[np.ndarray, np.ndarray, np.ndarray, bool]:
    """Batched fixed-point discrimination.

    ``g`` has shape (batch, outcomes, dim, dim): PSD reward operators. The
    optimal POVM maximizes sum_y tr(F_y G_y). Returns (lower, upper, povm,
    converged): ``lower`` is achieved by the returned POVM, ``upper`` by a
    lifted dual-feasible operator, evaluated every ``dual_every`` sweeps
    (certification is not needed at every step of a search). Problems whose
    gap the iteration fails to close are handed to the central-path solver
    when ``refine`` is set; its certificates replace the weaker ones.
    """
    b, k, d, _ = g.shape
    if d == 1:
        vals = g[:, :, 0, 0].real
        best = vals.argmax(axis=1)
        f = np.zeros_like(g)
        f[np.arange(b), best, 0, 0] = 1.0
        top = vals.max(axis=1)
        return top, top, f, True
    eye = np.broadcast_to(np.eye(d, dtype=complex), (b, d, d))
    f = np.broadcast_to(np.eye(d, dtype=complex) / k, g.shape).copy()
    best_lower = np.full(b, -np.inf)
    best_upper = np.full(b, np.inf)
    best_f = f.copy()
    converged = False
    stale = 0
    window_mark = -np.inf
    sweeps = min(max_iter, 200) if refine else max_iter
    for it in range(sweeps):
        lower = np.einsum("bkij,bkji->b", f, g).real
        gained = lower > best_lower
        if gained.any():
            best_f[gained] = f[gained]
            stale = 0
        else:
            stale += 1
        best_lower = np.maximum(best_lower, lower)
        if it % dual_every == 0:
            best_upper = np.minimum(best_upper, _dual_upper(g, f))
            if np.all(best_upper - best_lower <= tol):
                converged = True
                break
        if it % 25 == 24:
            total = float(best_lower.sum())
            if total - window_mark < 1e-12 * max(1.0, abs(total)):
                break  # value has stopped moving; the dual pins the gap
            window_mark = total
        if stale >= 12:
            break
        m = np.einsum("bkij,bkjl,bklm->bim", g, f, g)
        m = (m + np.conj(np.transpose(m, (0, 2, 1)))) / 2
        w, v = np.linalg.eigh(m)
        wmax = np.clip(w[:, -1:], 1e-300, None)
        inv_sqrt = np.where(w > 1e-14 * wmax, 1.0 / np.sqrt(np.clip(w, 1e-300, None)), 0.0)
        s = np.einsum("bij,bj,bkj->bik", v, inv_sqrt, np.conj(v))
        f = s[:, None] @ g @ f @ g @ s[:, None]
        slack = eye - f.sum(axis=1)
        f = f + slack[:, None] / k
    best_upper = np.minimum(best_upper, _dual_upper(g, best_f))
    if refine and not converged:
        open_idx = np.flatnonzero(best_upper - best_lower > tol)
        for i in open_idx:
            lo, up, fi = _ipm_single(g[i], gap_target=tol / 2)
            if lo > best_lower[i]:
                best_lower[i] = lo
                best_f[i] = fi
            best_upper[i] = min(best_upper[i], up)
    converged = bool(np.all(best_upper - best_lower <= tol))
    return best_lower, best_upper, best_f, converged


def optimal_discrimination(ensemble, tol: float = 1e-9,
                           max_iter: int = 10_000) -> DiscriminationResult:
    """Optimal success for one ensemble.

    ``ensemble`` is either a list of (probability, density matrix) pairs or
    a list of unnormalized PSD reward operators; the objective is
    max_POVM sum_y tr(F_y G_y).
    """
    ops = []
    for item in ensemble:
        if isinstance(item, tuple):
            p, rho = item
            ops.append(float(p) * check_density_operator(rho))
        else:
            ops.append(as_matrix(item))
    if not ops:
        raise DomainError("ensemble must be non-empty")
    d = ops[0].shape[0]
    if any(o.shape != (d, d) for o in ops):
        raise ShapeError("ensemble operators must share one dimension")
    if len(ops) == 2:
        return _helstrom_pair(ops[0], ops[1])
    g = np.stack(ops)[None]
    lower, upper, f, conv = _discriminate_batch(g, tol, max_iter)
    return DiscriminationResult(
        win_prob=float(lower[0]), upper_bound=float(upper[0]),
        dual_gap=float(max(0.0, upper[0] - lower[0])),
        povm=[f[0, i] for i in range(len(ops))], converged=conv)


# ---------------------------------------------------------------------------
# exact game evaluation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GuessResult:
    """Certified winning probability of a strategy.

    ``win_prob`` is achieved by explicit decoders (a valid lower bound on
    the optimum for this encoding); ``certified_gap`` bounds how far the
    optimal decoding could exceed it.
    """

    win_prob: float
    per_theta: dict[str, float]
    certified_gap: float
    converged: bool = True
    decoders: dict | None = None

    def __post_init__(self):
        n_thetas = len(self.per_theta)
        mean = sum(self.per_theta.values()) / n_thetas
        if abs(mean - self.win_prob) > 1e-12:
            raise DomainError("per-theta values do not average to win_prob")


def _hamming_balls(n: int, radius: int) -> list[np.ndarray]:
    """ball[y] = indices x with popcount(x xor y) <= radius."""
    size = 1 << n
    pop = np.array([bin(i).count("1") for i in range(size)])
    return [np.flatnonzero(pop[np.arange(size) ^ y] <= radius) for y in range(size)]


class _GameContext:
    """Strategy-independent game data for one (device, n, gamma) triple.

    Caches the conditional B-side operators per basis string and the
    Hamming-ball membership matrix, so that repeated strategy evaluations
    (the see-saw inner loop in particular) skip the setup cost.
    """

    def __init__(self, device: DeviceModel, n: int, gamma: float):
        if not 0.0 <= gamma <= 0.5:
            raise DomainError(f"gamma must lie in [0, 0.5], got {gamma!r}")
        self.device = device
        self.n = n
        self.gamma = gamma
        self.radius = math.floor(gamma * n)
        self.thetas = list(itertools.product((0, 1), repeat=n))
        self.rho_x = {theta: np.stack(_conditional_b_ops(device, theta))
                      for theta in self.thetas}
        size = 1 << n
        if self.radius > 0:
            balls = _hamming_balls(n, self.radius)
            mask = np.zeros((size, size))
            for y, ball in enumerate(balls):
                mask[y, ball] = 1.0
            self.ball_mask = mask
        else:
            self.ball_mask = None

    def rewards(self, strategy: Strategy) -> np.ndarray:
        """Stacked reward operators, shape (thetas*branches, guesses, mem, mem)."""
        _check_caps(strategy, self.n)
        branches = strategy.kraus_branches(self.device.dim_b, self.n)
        single = all(len(br) == 1 for br in branches)
        gs = []
        for theta in self.thetas:
            rho = self.rho_x[theta]                      # (k, Din, Din)
            if single:
                e = np.stack([br[0] for br in branches])  # (M, mem, Din)
                w = np.einsum("mab,xbc,mdc->mxad", e, rho, e.conj())
            else:
                w = np.stack([
                    sum(np.einsum("ab,xbc,dc->xad", e, rho, e.conj())
                        for e in br) for br in branches])
            if self.ball_mask is not None:
                w = np.einsum("yx,mxad->myad", self.ball_mask, w)
            gs.append(w)
        return np.concatenate(gs, axis=0)

    def result(self, lower: np.ndarray, upper: np.ndarray, f: np.ndarray,
               converged: bool, want_decoders: bool) -> GuessResult:
        n_thetas = len(self.thetas)
        low = lower.reshape(n_thetas, -1).sum(axis=1)
        gap = np.clip(upper - lower, 0.0, None).reshape(n_thetas, -1).sum(axis=1)
        per_theta = {"".join(str(t) for t in theta): float(v)
                     for theta, v in zip(self.thetas, low)}
        decoders = None
        if want_decoders:
            m_count = f.shape[0] // n_thetas
            decoders = {}
            for ti, theta in enumerate(self.thetas):
                key = "".join(str(t) for t in theta)
                decoders[key] = [[f[ti * m_count + m, y] for y in range(f.shape[1])]
                                 for m in range(m_count)]
        win = float(low.sum() / n_thetas)
        return GuessResult(win_prob=win, per_theta=per_theta,
                           certified_gap=float(gap.sum() / n_thetas),
                           converged=converged, decoders=decoders)


def exact_win_probability(device: DeviceModel, strategy: Strategy, n: int,
                          d: int, gamma: float = 0.0, tol: float = 1e-9,
                          max_iter: int = 10_000,
                          want_decoders: bool = False,
                          _ctx: "_GameContext | None" = None) -> GuessResult:
    """Exact winning probability of ``strategy`` with optimal decoding.

    Enumerates all 2^n basis strings; for each, solves the discrimination of
    the post-measurement ensemble (with Hamming-ball rewards when gamma > 0)
    branch by classical branch. The strategy must fit the stated memory
    dimension d.
    """
    if d < 1:
        raise DomainError("memory dimension d must be at least 1")
    _check_caps(strategy, n)
    mem = strategy.memory_dim(device.dim_b, n)
    if mem > d:
        raise StrategyError(f"strategy needs memory dimension {mem} > allowed {d}")
    ctx = _ctx if _ctx is not None else _GameContext(device, n, gamma)
    g = ctx.rewards(strategy)
    lower, upper, f, conv = _discriminate_batch(g, tol, max_iter)
    return ctx.result(lower, upper, f, conv, want_decoders)


def replay_win_probability(device: DeviceModel, strategy: Strategy, n: int,
                           gamma: float, decoders: dict, trials: int,
                           seed: int = 0) -> float:
    """Monte-Carlo replay of a strategy with fixed decoders.

    Samples theta, Alice's outcome, the classical branch and the decoder
    outcome per trial; the empirical win rate should reproduce the exact
    value within sampling error.
    """
    rng = RandomSuite(seed).rng
    radius = math.floor(gamma * n)
    wins = 0
    thetas = list(itertools.product((0, 1), repeat=n))
    cache = {}
    for _ in range(trials):
        theta = thetas[rng.integers(len(thetas))]
        key = "".join(str(t) for t in theta)
        if key not in cache:
            cache[key] = post_measurement_ensemble(device, strategy, n, theta)
        ens = cache[key]
        x = int(rng.choice(len(ens.q), p=ens.q / ens.q.sum()))
        joint = np.array([max(0.0, float(np.trace(ops[x]).real))
                          for ops in ens.branch_ops])
        m = int(rng.choice(len(joint), p=joint / joint.sum()))
        rho = ens.branch_ops[m][x] / joint[m]
        povm = decoders[key][m]
        probs = np.array([max(0.0, float(np.trace(f @ rho).real)) for f in povm])
        y = int(rng.choice(len(probs), p=probs / probs.sum()))
        wins += int(bin(x ^ y).count("1") <= radius)
    return wins / trials


# ---------------------------------------------------------------------------
# see-saw search over encodings
# ---------------------------------------------------------------------------

def _haar_isometry(suite: RandomSuite, rows: int, cols: int) -> Array:
    q, r = np.linalg.qr(suite.ginibre(rows, cols))
    diag = np.diagonal(r)
    return q * (diag / np.abs(diag))


def _isometry_from_kraus(kraus: list[Array], d: int, m_count: int,
                         dim_in: int) -> Array:
    """Stack single-element Kraus branches into the (d*M, Din) isometry layout."""
    v = np.zeros((d * m_count, dim_in), dtype=complex)
    for m, e in enumerate(kraus):
        rows = e.shape[0]
        for i in range(rows):
            v[i * m_count + m, :] = e[i, :]
    return v


def _structured_isometries(device: DeviceModel, n: int, d: int,
                           m_count: int) -> list[Array]:
    """Known-good starting points: store-what-fits and intercept measurements."""
    dim_in = device.dim_b ** n
    inits: list[Array] = []
    keep_size = 0
    while device.dim_b ** (keep_size + 1) <= d and keep_size < n:
        keep_size += 1
    for keep in itertools.combinations(range(n), keep_size):
        strat = StoreSubset(keep=keep) if keep else breidbart(n)
        branches = strat.kraus_branches(device.dim_b, n)
        kraus = [np.vstack([br[0], np.zeros((d - br[0].shape[0], dim_in))])
                 if br[0].shape[0] < d else br[0] for br in branches]
        if len(kraus) <= m_count:
            inits.append(_isometry_from_kraus(kraus, d, m_count, dim_in))
    return inits


def seesaw_search(device: DeviceModel, n: int, d: int, restarts: int = 4,
                  seed: int = 0, gamma: float = 0.0, iters: int = 60,
                  tol: float = 1e-9) -> tuple[GuessResult, GeneralEncoding]:
    """Alternating search for a strong encoding.

    The decoding step is always optimal (the discrimination solver); the
    encoding step perturbs the instrument's isometry with shrinking random
    steps, accepting improvements. Structured starts (store what fits, the
    intercept measurement) seed the first restarts, Haar isometries the
    rest. The returned value is re-certified at full precision and is a
    valid lower bound on the game optimum for this device.
    """
    if n > 2 or d > max(2, device.dim_b):
        raise DimensionCapError("see-saw is capped at n <= 2 and qubit-size memories")
    dim_in = device.dim_b ** n
    m_count = dim_in
    ctx = _GameContext(device, n, gamma)
    best_val = -math.inf
    best_v: Array | None = None

    def value_of(v: Array) -> float:
        enc = GeneralEncoding.from_isometry(v, d)
        g = ctx.rewards(enc)
        lower, _, _, _ = _discriminate_batch(g, tol=1e-7, max_iter=80,
                                             dual_every=10 ** 9, refine=False)
        return float(lower.reshape(len(ctx.thetas), -1).sum(axis=1).mean())

    structured = _structured_isometries(device, n, d, m_count)
    for r in range(restarts):
        suite = RandomSuite(child_seed(seed, r))
        if r < len(structured):
            v = structured[r]
        else:
            v = _haar_isometry(suite, d * m_count, dim_in)
        val = value_of(v)
        step = 0.35
        stale = 0
        for _ in range(iters):
            cand = v + step * suite.ginibre(*v.shape)
            q, rr = np.linalg.qr(cand)
            diag = np.diagonal(rr)
            cand = q * (diag / np.abs(diag))
            cval = value_of(cand)
            if cval > val + 1e-12:
                v, val = cand, cval
                stale = 0
            else:
                stale += 1
                if stale >= 4:
                    step *= 0.6
                    stale = 0
                    if step < 1e-3:
                        break
        if val > best_val:
            best_val, best_v = val, v
    assert best_v is not None
    enc = GeneralEncoding.from_isometry(best_v, d)
    res = exact_win_probability(device, enc, n, d, gamma, tol=tol, _ctx=ctx)
    return res, enc


# ---------------------------------------------------------------------------
# random device families
# ---------------------------------------------------------------------------

def random_qubit_device(suite: RandomSuite) -> DeviceModel:
    """Haar-random single-round qubit device.

    sigma_AB is the two-qubit marginal of a Haar pure state with a qubit
    purifier; Alice's two binary measurements are Haar-rotated rank-one
    projective pairs. Bob's honest side and the testing observables are the
    BB84 defaults (they do not enter the guessing game).
    """
    psi = suite.pure_state(8).reshape(8, 1)
    sigma = partial_trace(psi @ dagger(psi), [2, 2, 2], [0, 1])
    projs = []
    for _ in range(2):
        u = suite.unitary(2)
        projs.append(u[:, :1] @ dagger(u[:, :1]))
    ideal = ideal_bb84_device()
    return DeviceModel(
        dim_a=2, dim_b=2, sigma_ab=sigma,
        alice_meas_0=BinaryMeasurement.from_projector(projs[0]),
        alice_meas_1=BinaryMeasurement.from_projector(projs[1]),
        bob_meas_0=ideal.bob_meas_0, bob_meas_1=ideal.bob_meas_1,
        test_t0=ideal.test_t0, test_t1=ideal.test_t1)


def random_rotated_ideal_device(suite: RandomSuite, max_noise: float = 0.3) -> DeviceModel:
    """Locally rotated, partially depolarized EPR device; violates CHSH often."""
    ideal = ideal_bb84_device()
    ua = suite.unitary(2)
    noise = float(suite.rng.random() * max_noise)
    rot = np.kron(ua, np.eye(2))
    sigma = rot @ ideal.sigma_ab @ dagger(rot)
    sigma = (1.0 - noise) * sigma + noise * np.eye(4) / 4
    return DeviceModel(
        dim_a=2, dim_b=2, sigma_ab=sigma,
        alice_meas_0=BinaryMeasurement(ua @ ideal.alice_meas_0.p0 @ dagger(ua),
                                       ua @ ideal.alice_meas_0.p1 @ dagger(ua)),
        alice_meas_1=BinaryMeasurement(ua @ ideal.alice_meas_1.p0 @ dagger(ua),
                                       ua @ ideal.alice_meas_1.p1 @ dagger(ua)),
        bob_meas_0=ideal.bob_meas_0, bob_meas_1=ideal.bob_meas_1,
        test_t0=ideal.test_t0, test_t1=ideal.test_t1)


def strategy_family(n: int, d: int, dim_b: int, suite: RandomSuite) -> list[Strategy]:
    """Concrete attacks pitted against the bound in the fuzz campaigns."""
    family: list[Strategy] = [breidbart(n)]
    base_angles = [0.0, math.pi / 4, 3 * math.pi / 8]
    for a in base_angles:
        family.append(MeasureAll(angles=(a,) * n))
    for _ in range(2):
        family.append(MeasureAll(angles=tuple(
            suite.rng.random(n) * (math.pi / 2))))
    if d >= dim_b:
        for k in range(n):
            family.append(StoreSubset(keep=(k,)))
            family.append(StoreSubset(keep=(k,), angles=(0.0,) * (n - 1)))
    if d >= dim_b ** n and n >= 2:
        family.append(StoreSubset(keep=tuple(range(n))))
    return family


# ---------------------------------------------------------------------------
# fuzzed verifiers for the three technical inequalities
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VerificationReport:
    """Outcome of a fuzz campaign against one inequality."""

    name: str
    trials: int
    passed: bool
    max_ratio: float
    worst_slack: float
    violations: list[dict] = field(default_factory=list)
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name, "trials": self.trials, "passed": self.passed,
            "max_ratio": self.max_ratio, "worst_slack": self.worst_slack,
            "violations": self.violations, "details": self.details,
        }


def _run_trials(worker, trials: int, threads: int) -> list[dict]:
    """Run independent trial workers, optionally on a thread pool.

    Each worker derives its randomness from its own trial index, so results
    are identical for any thread count; records come back sorted by index.
    """
    if threads <= 1:
        return [worker(t) for t in range(trials)]
    from concurrent.futures import ThreadPoolExecutor
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(worker, range(trials)))


def verify_key_lemma(trials: int, n: int, d: int, gamma: float = 0.0,
                     seed: int = 0, seesaw_restarts: int = 2,
                     seesaw_iters: int = 30, threads: int = 1) -> VerificationReport:
    """Pit strategy families and see-saw attacks against B'(n, d, eps_+, gamma).

    The certificate uses the device's exact effective anti-commutator, the
    sharpest value the proof supports, so any CHSH-derived zeta >= eps_+
    passes a fortiori. A violation report carries the offending device.
    """
    if n > 2 or d > 2:
        raise DimensionCapError("key-lemma fuzz is capped at n <= 2, d <= 2")

    def work(trial: int) -> dict:
        suite = RandomSuite(child_seed(seed, trial))
        device = random_qubit_device(suite)
        eps = epsilon_plus_direct(device.alice_meas_0, device.alice_meas_1,
                                  device.sigma_a)
        bound = bound_imperfect(n, d, eps, gamma)
        ctx = _GameContext(device, n, gamma)
        best_win = 0.0
        best_kind = ""
        for strat in strategy_family(n, d, device.dim_b, suite):
            if strat.memory_dim(device.dim_b, n) > d:
                continue
            res = exact_win_probability(device, strat, n, d, gamma, _ctx=ctx)
            if res.win_prob > best_win:
                best_win, best_kind = res.win_prob, strat.kind
        # A saturated bound (B' = 1) cannot be challenged by any probability;
        # the see-saw search only adds information below it.
        if bound < 1.0:
            res, _enc = seesaw_search(device, n, d, restarts=seesaw_restarts,
                                      seed=int(suite.rng.integers(2 ** 32)),
                                      gamma=gamma, iters=seesaw_iters)
            if res.win_prob > best_win:
                best_win, best_kind = res.win_prob, "seesaw"
        return {"trial": trial, "epsilon_plus": eps, "bound": bound,
                "win_prob": best_win, "strategy": best_kind, "device": device}

    records = _run_trials(work, trials, threads)
    max_ratio = 0.0
    worst_slack = math.inf
    violations: list[dict] = []
    for rec in records:
        bound, best_win = rec["bound"], rec["win_prob"]
        max_ratio = max(max_ratio, best_win / bound if bound > 0 else math.inf)
        worst_slack = min(worst_slack, bound + 1e-6 - best_win)
        if best_win > bound + 1e-6:
            violations.append({
                "trial": rec["trial"], "epsilon_plus": rec["epsilon_plus"],
                "bound": bound, "win_prob": best_win,
                "strategy": rec["strategy"], "device": rec["device"].to_obj(),
            })
    return VerificationReport(
        name="key-lemma", trials=trials, passed=not violations,
        max_ratio=max_ratio, worst_slack=worst_slack, violations=violations,
        details={"n": n, "d": d, "gamma": gamma, "seed": seed})


def verify_norm_lemma(trials: int, max_dim: int = 16, max_terms: int = 8,
                      seed: int = 0, threads: int = 1) -> VerificationReport:
    """Fuzz ||sum A_i|| <= max_j sum_i ||sqrt(A_i) sqrt(A_j)|| on random PSD sets.

    Also checks the proof's intermediate chain
    ||sum A_i|| = ||K|| <= ||L|| <= sqrt(||L||_1^I ||L||_inf^I) on the same
    instances, with K the block matrix of sqrt(A_i) sqrt(A_j) and L its
    entrywise norm matrix.
    """
    if max_dim > 16 or max_terms > 8:
        raise DimensionCapError("norm-lemma fuzz is capped at dim <= 16, N <= 8")

    def work(trial: int) -> dict:
        suite = RandomSuite(child_seed(seed, trial))
        rng = suite.rng
        dim = int(rng.integers(1, max_dim + 1))
        n_terms = int(rng.integers(1, max_terms + 1))
        mats = [suite.psd(dim, scale=float(rng.random() * 2 + 0.1))
                for _ in range(n_terms)]
        roots = [psd_sqrt(a) for a in mats]
        lhs = operator_norm(sum(mats))
        l_mat = np.array([[operator_norm(ri @ rj) for rj in roots] for ri in roots])
        rhs = float(np.max(l_mat.sum(axis=0)))
        k_block = np.block([[ri @ rj for rj in roots] for ri in roots])
        k_norm = operator_norm(k_block)
        l_norm = operator_norm(l_mat)
        hoelder = math.sqrt(induced_norm(l_mat, 1) * induced_norm(l_mat, math.inf))
        return {"trial": trial, "dim": dim, "terms": n_terms, "lhs": lhs,
                "rhs": rhs, "k_norm": k_norm, "l_norm": l_norm,
                "hoelder": hoelder}

    records = _run_trials(work, trials, threads)
    max_ratio = 0.0
    worst_slack = math.inf
    violations: list[dict] = []
    for rec in records:
        slack = min(rec["rhs"] - rec["lhs"], rec["l_norm"] - rec["k_norm"],
                    rec["hoelder"] - rec["l_norm"])
        worst_slack = min(worst_slack, slack)
        max_ratio = max(max_ratio,
                        rec["lhs"] / rec["rhs"] if rec["rhs"] > 0 else math.inf)
        if slack < -1e-9 or abs(rec["k_norm"] - rec["lhs"]) > 1e-7 * max(1.0, rec["lhs"]):
            violations.append(rec)
    return VerificationReport(
        name="norm-lemma", trials=trials, passed=not violations,
        max_ratio=max_ratio, worst_slack=worst_slack, violations=violations,
        details={"max_dim": max_dim, "max_terms": max_terms, "seed": seed})


def _block_measurement(beta: float) -> dict[tuple[int, int], Array]:
    """Within-block projectors P^theta_x for a two-dimensional Jordan block."""
    c, s = math.cos(beta), math.sin(beta)
    zero_one = np.array([c, s], dtype=complex)
    p = {
        (0, 0): np.diag([1.0, 0.0]).astype(complex),
        (0, 1): np.diag([0.0, 1.0]).astype(complex),
        (1, 0): np.outer(zero_one, zero_one.conj()),
    }
    p[(1, 1)] = np.eye(2, dtype=complex) - p[(1, 0)]
    return p


def verify_overlap_lemma(trials: int, n: int, d: int,
                         seed: int = 0, threads: int = 1) -> VerificationReport:
    """Fuzz the per-block overlap bounds against random angles and POVMs.

    Builds Pi^theta = sum_x P^theta_{x|b} (x) F^theta_x from random block
    angles beta and random Bob POVMs on dimension d, and checks both bound
    forms (the max{cos, sin} product and its (1+eps)/2 rewriting, which are
    equal identically) against ||sqrt(Pi^theta') sqrt(Pi^theta)|| for every
    ordered basis pair.
    """
    if n > 2 or d > 3:
        raise DimensionCapError("overlap fuzz is capped at n <= 2, d <= 3")
    thetas_cache = {m: list(itertools.product((0, 1), repeat=m)) for m in (1, 2)}

    def work(trial: int) -> dict:
        suite = RandomSuite(child_seed(seed, trial))
        rng = suite.rng
        n_use = int(rng.integers(1, n + 1))
        d_use = int(rng.integers(1, d + 1))
        betas = rng.random(n_use) * (math.pi / 2)
        blocks = [_block_measurement(b) for b in betas]
        thetas = thetas_cache[n_use]
        povms = {theta: suite.povm(d_use, 2 ** n_use) for theta in thetas}
        pis = {}
        for theta in thetas:
            pi = np.zeros((2 ** n_use * d_use,) * 2, dtype=complex)
            for xi, x in enumerate(itertools.product((0, 1), repeat=n_use)):
                proj = np.array([[1.0]], dtype=complex)
                for k in range(n_use):
                    proj = np.kron(proj, blocks[k][(theta[k], x[k])])
                pi += np.kron(proj, povms[theta][xi])
            pis[theta] = psd_sqrt(pi)
        pairs = []
        for tp in thetas:
            for t in thetas:
                lhs = operator_norm(pis[tp] @ pis[t])
                w = [a ^ b for a, b in zip(tp, t)]
                prod_max = math.prod(
                    max(math.cos(betas[k]), math.sin(betas[k])) ** w[k]
                    for k in range(n_use))
                eps = [abs(math.cos(2 * betas[k])) for k in range(n_use)]
                prod_eps = math.prod(
                    ((1 + eps[k]) / 2) ** (w[k] / 2) for k in range(n_use))
                rhs1 = min(1.0, math.sqrt(d_use) * prod_max)
                rhs2 = min(1.0, math.sqrt(d_use) * prod_eps)
                pairs.append({"theta_prime": list(tp), "theta": list(t),
                              "lhs": lhs, "rhs_angles": rhs1, "rhs_eps": rhs2})
        return {"trial": trial, "n": n_use, "d": d_use,
                "betas": [float(x) for x in betas], "pairs": pairs}

    records = _run_trials(work, trials, threads)
    max_ratio = 0.0
    worst_slack = math.inf
    violations: list[dict] = []
    for rec in records:
        for pair in rec["pairs"]:
            lhs, rhs1, rhs2 = pair["lhs"], pair["rhs_angles"], pair["rhs_eps"]
            slack = min(rhs1 - lhs, rhs2 - lhs)
            worst_slack = min(worst_slack, slack)
            max_ratio = max(max_ratio, lhs / rhs1 if rhs1 > 0 else math.inf)
            if slack < -1e-9 or abs(rhs1 - rhs2) > 1e-12:
                violations.append({
                    "trial": rec["trial"], "n": rec["n"], "d": rec["d"],
                    "betas": rec["betas"], **pair,
                })
    return VerificationReport(
        name="overlap-lemma", trials=trials, passed=not violations,
        max_ratio=max_ratio, worst_slack=worst_slack, violations=violations,
        details={"n": n, "d": d, "seed": seed})
