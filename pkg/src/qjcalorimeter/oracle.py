"""Deterministic reference solutions for the trajectory ensemble.

The ensemble average over jump histories is captured exactly by a hybrid
master equation: one unnormalised 2x2 qubit density matrix per calorimeter
energy ``k``, coupled to its neighbours by the jump terms.  It is stepped
with plain first-order Euler at the simulator's ``dt``; the update is linear
and conserves total trace up to rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.stats import nbinom

from .model import DriveProtocol, QubitState, SimulationConfig, excited_probability
from .rates import RatePair, rates_ideal

LEAK_TOL = 1e-10
EDGE = 5


class BoundaryOverflow(RuntimeError):
    """Probability mass reached the top of the truncated calorimeter ladder."""


@dataclass
class HybridSolution:
    times: np.ndarray
    excited_population: np.ndarray
    mean_k: np.ndarray
    k_distribution: np.ndarray  # (len(times), k_max + 1); empty for the ideal bath
    trace: np.ndarray
    k_max: int


@njit(cache=True)
def _hybrid_euler(up, down, r00, r11, r01, w_re, w_im, dt, sample_idx, single,
                  out_pop, out_k, out_dist, out_trace, tilt_down=1.0, tilt_up=1.0):
    K = r00.shape[0]
    S = sample_idx.shape[0]
    nsteps = w_re.shape[0]
    n00 = np.empty(K)
    n11 = np.empty(K)
    n01 = np.empty(K, dtype=np.complex128)
    heat = 0.0
    sp = 0
    leak = 0.0
    for j in range(nsteps + 1):
        while sp < S and sample_idx[sp] == j:
            pop = 0.0
            mk = 0.0
            tr = 0.0
            for k in range(K):
                t = r00[k] + r11[k]
                pop += r11[k]
                mk += k * t
                tr += t
                if not single:
                    out_dist[sp, k] = t
            out_pop[sp] = pop
            out_k[sp] = heat if single else mk
            out_trace[sp] = tr
            sp += 1
        if j == nsteps:
            break
        w = complex(w_re[j], w_im[j])
        for k in range(K):
            gu = up[k]
            gd = down[k]
            a = r00[k]
            b = r11[k]
            c = r01[k]
            # -i [H_eff rho - rho H_eff^dagger], H_eff = [[-i gu/2, conj(w)], [w, -i gd/2]]
            d00 = -gu * a - 2.0 * (w * c).imag
            d11 = -gd * b + 2.0 * (w * c).imag
            d01 = -0.5 * (gu + gd) * c - 1j * (w.conjugate() * b - a * w.conjugate())
            # tilt factors weight each jump by exp(-s * heat), for generating functions
            if single:
                d00 += tilt_down * gd * b
                d11 += tilt_up * gu * a
            else:
                if k > 0:
                    d00 += tilt_down * down[k - 1] * r11[k - 1]
                if k < K - 1:
                    d11 += tilt_up * up[k + 1] * r00[k + 1]
            n00[k] = a + dt * d00
            n11[k] = b + dt * d11
            n01[k] = c + dt * d01
        if single:
            heat += dt * (down[0] * r11[0] - up[0] * r00[0])
        else:
            leak += dt * down[K - 1] * r11[K - 1]
        for k in range(K):
            r00[k] = n00[k]
            r11[k] = n11[k]
            r01[k] = n01[k]
    return leak


def _initial_sectors(config: SimulationConfig, k_max: int):
    K = k_max + 1
    r00 = np.zeros(K)
    r11 = np.zeros(K)
    r01 = np.zeros(K, dtype=np.complex128)
    iq = config.initial_qubit
    if iq == "canonical":
        pe = excited_probability(config.beta)
        q00, q11, q01 = 1.0 - pe, pe, 0j
    else:
        psi = QubitState.ground() if iq == "ground" else QubitState.excited() if iq == "excited" else iq
        psi = psi.normalized()
        q00, q11, q01 = abs(psi.c0) ** 2, abs(psi.c1) ** 2, psi.c0 * psi.c1.conjugate()
    if config.bath_mode == "ideal":
        pk = np.array([1.0])
    elif config.initial_k is not None:
        pk = np.zeros(K)
        pk[config.initial_k] = 1.0
    else:
        pk = nbinom.pmf(np.arange(K), config.n, -math.expm1(-config.beta))
    r00[: len(pk)] = q00 * pk
    r11[: len(pk)] = q11 * pk
    r01[: len(pk)] = q01 * pk
    return r00, r11, r01


def default_k_max(config: SimulationConfig) -> int:
    if config.initial_k is not None:
        return config.initial_k + 40
    nbar = 1.0 / math.expm1(config.beta)
    mean = config.n * nbar
    sd = math.sqrt(config.n * nbar * (nbar + 1.0))
    # drive-pumped energy is bounded by a few quanta per unit of amplitude*time
    pumped = config.protocol.amplitude * config.protocol.duration / math.pi
    return int(math.ceil(mean + 10.0 * sd + pumped + 20))


def hybrid_master_evolve(config: SimulationConfig, sample_times=None, k_max: int | None = None,
                         grow: bool = True) -> HybridSolution:
    """Ensemble-averaged observables of ``config`` by direct integration.

    Supported for the microstate, macrostate and ideal baths (the first two
    share one equation since only the total ``k`` enters the rates).  For the
    ideal bath ``mean_k`` is the expected heat released into the bath.
    Raises :class:`BoundaryOverflow` if mass reaches the ladder top and
    ``grow`` is false; otherwise ``k_max`` is doubled and the run repeated.
    """
    if config.bath_mode == "gaussian":
        raise ValueError("the hybrid equation covers the integer-quanta baths only")
    times = np.asarray(config.sample_times if sample_times is None else sample_times, dtype=float)
    cfg = config if sample_times is None else _with_samples(config, times)
    proto = cfg.protocol
    w = proto.coupling_table()
    single = cfg.bath_mode == "ideal"
    km = 0 if single else (default_k_max(cfg) if k_max is None else k_max)
    while True:
        K = km + 1
        if single:
            ideal = rates_ideal(cfg.beta, cfg.n, cfg.gamma)
            up, down = np.array([ideal.up]), np.array([ideal.down])
        else:
            k = np.arange(K, dtype=float)
            up, down = cfg.gamma * k, cfg.gamma * (k + cfg.n)
        r00, r11, r01 = _initial_sectors(cfg, km)
        S = len(times)
        pop, mk, tr = np.zeros(S), np.zeros(S), np.zeros(S)
        dist = np.zeros((S, 0 if single else K))
        leak = _hybrid_euler(up, down, r00, r11, r01, np.ascontiguousarray(w.real),
                             np.ascontiguousarray(w.imag), proto.dt, cfg.sample_steps(), single,
                             pop, mk, dist, tr)
        edge = 0.0 if single else float(np.sum(r00[-EDGE:] + r11[-EDGE:]))
        if leak <= LEAK_TOL and edge <= LEAK_TOL:
            return HybridSolution(times, pop, mk, dist, tr, km)
        if not grow:
            raise BoundaryOverflow(f"k_max={km} too small: edge mass {edge:.3g}, leak {leak:.3g}")
        km *= 2


def _with_samples(config: SimulationConfig, times: np.ndarray) -> SimulationConfig:
    from dataclasses import replace

    return replace(config, sample_times=tuple(times))


@njit(cache=True)
def _mm(A, B):
    C = np.empty((2, 2), dtype=np.complex128)
    for i in range(2):
        for j in range(2):
            C[i, j] = A[i, 0] * B[0, j] + A[i, 1] * B[1, j]
    return C


@njit(cache=True)
def _lindblad_euler(H0, gu, gd, w_re, w_im, dt, rho, sample_idx, out):
    S = sample_idx.shape[0]
    nsteps = w_re.shape[0]
    sm = np.zeros((2, 2), dtype=np.complex128)
    sm[0, 1] = 1.0  # |0><1|
    sp_ = sm.T.copy()
    sp = 0
    H = H0.copy()
    for j in range(nsteps + 1):
        while sp < S and sample_idx[sp] == j:
            out[sp] = rho[1, 1].real
            sp += 1
        if j == nsteps:
            break
        w = complex(w_re[j], w_im[j])
        H[0, 1] = w.conjugate()
        H[1, 0] = w
        comm = _mm(H, rho) - _mm(rho, H)
        # D[L] rho = L rho L^+ - {L^+ L, rho}/2
        Dm = _mm(_mm(sm, rho), sp_) - 0.5 * (_mm(_mm(sp_, sm), rho) + _mm(rho, _mm(sp_, sm)))
        Dp = _mm(_mm(sp_, rho), sm) - 0.5 * (_mm(_mm(sm, sp_), rho) + _mm(rho, _mm(sm, sp_)))
        rho = rho + dt * (-1j * comm + gd * Dm + gu * Dp)


def lindblad_two_level(beta: float, n: int, gamma: float, drive: DriveProtocol, sample_times,
                       initial: QubitState | str = "canonical") -> np.ndarray:
    """Excited population of the qubit coupled to the ideal bath, in commutator-plus-dissipator form."""
    r = rates_ideal(beta, n, gamma)
    if initial == "canonical":
        pe = excited_probability(beta)
        rho = np.diag([1.0 - pe, pe]).astype(np.complex128)
    else:
        psi = {"ground": QubitState.ground(), "excited": QubitState.excited()}.get(initial, initial)
        v = psi.normalized().as_array()
        rho = np.outer(v, v.conj())
    times = np.asarray(sample_times, dtype=float)
    idx = np.clip(np.rint(times / drive.dt).astype(np.int64), 0, drive.total_steps)
    w = drive.coupling_table()
    out = np.zeros(len(times))
    _lindblad_euler(np.zeros((2, 2), dtype=np.complex128), r.up, r.down,
                    np.ascontiguousarray(w.real), np.ascontiguousarray(w.imag), drive.dt,
                    rho, idx, out)
    return out


@dataclass(frozen=True)
class FirstJump:
    p_up: float
    p_down: float
    p_never: float
    rates: RatePair
    c0_sq: float
    c1_sq: float

    def waiting_density(self, t) -> np.ndarray:
        """Density of the first-jump time; integrates to ``1 - p_never``."""
        t = np.asarray(t, dtype=float)
        gu, gd = self.rates.up, self.rates.down
        return self.c0_sq * gu * np.exp(-gu * t) + self.c1_sq * gd * np.exp(-gd * t)

    @property
    def mean_wait(self) -> float:
        """Mean first-jump time conditioned on a jump happening."""
        m = 0.0
        if self.rates.up > 0:
            m += self.c0_sq / self.rates.up
        if self.rates.down > 0:
            m += self.c1_sq / self.rates.down
        return m / (1.0 - self.p_never)


def first_jump_probabilities(psi: QubitState, rates: RatePair) -> FirstJump:
    """Direction of the first jump of an undriven qubit.

    Without drive the two amplitudes decay independently, so the down-jump
    probability is ``|c1|^2`` whatever the rates, provided the rate is
    nonzero; a zero-rate component never jumps.
    """
    if rates.up < 0 or rates.down < 0:
        raise ValueError("rates must be non-negative")
    if rates.up == 0 and rates.down == 0:
        raise ValueError("both rates vanish: no jump ever happens")
    psi = psi.normalized()
    a, b = abs(psi.c0) ** 2, abs(psi.c1) ** 2
    p_up = a if rates.up > 0 else 0.0
    p_down = b if rates.down > 0 else 0.0
    return FirstJump(p_up, p_down, 1.0 - p_up - p_down, rates, a, b)


def _tilted_run(up, down, pe, pk, s, proto, single):
    """``sum_k tr[diag(1, e^-s) rho_k(tau)]`` for the exp(-s W)-tilted equation."""
    K = len(up)
    r00 = (1.0 - pe) * pk
    r11 = pe * math.exp(s) * pk
    r01 = np.zeros(K, dtype=np.complex128)
    w = proto.coupling_table()
    empty = np.zeros(0)
    _hybrid_euler(up, down, r00, r11, r01, np.ascontiguousarray(w.real), np.ascontiguousarray(w.imag),
                  proto.dt, np.zeros(0, dtype=np.int64), single, empty, empty,
                  np.zeros((0, 0 if single else K)), empty, math.exp(-s), math.exp(s))
    return float(np.sum(r00) + math.exp(-s) * np.sum(r11)), r00 + r11


def work_generating_function(config: SimulationConfig, s: float, k_max: int | None = None,
                             nodes: int = 64, sectors: int = 40) -> float:
    """Ensemble value of ``exp(-s W)`` for a canonical start, without sampling.

    Each jump in the hybrid equation is weighted by ``exp(-s)`` per quantum
    released to the bath and the endpoints by ``exp(+-s)`` per qubit
    quantum, so the final total trace is the generating function of the
    work.  The Gaussian bath is handled by quadrature over the initial bath
    energy, each node carrying its own ladder ``E + m``.
    """
    if config.initial_qubit != "canonical" or config.initial_k is not None:
        raise ValueError("needs a canonical initial state")
    beta = config.beta
    pe = excited_probability(beta)
    proto = config.protocol
    mode = config.bath_mode
    if mode == "ideal":
        r = rates_ideal(beta, config.n, config.gamma)
        return _tilted_run(np.array([r.up]), np.array([r.down]), pe, np.array([1.0]), s, proto, True)[0]
    if mode in ("micro", "macro"):
        km = default_k_max(config) if k_max is None else k_max
        k = np.arange(km + 1, dtype=float)
        pk = nbinom.pmf(np.arange(km + 1), config.n, -math.expm1(-beta))
        return _tilted_run(config.gamma * k, config.gamma * (k + config.n), pe, pk, s, proto, False)[0]

    from .model import GaussianTemp
    from .rates import rates_gaussian

    gp = config.gaussian
    mean, var = gp.mean_energy(beta), gp.variance(beta)
    z, wq = np.polynomial.hermite_e.hermegauss(nodes)
    E_nodes = mean + math.sqrt(var) * z
    keep = E_nodes > 0
    wq = wq[keep] / wq[keep].sum()
    total = 0.0
    for E, weight in zip(E_nodes[keep], wq):
        m_lo = -int(math.ceil(E)) + 1  # lowest rung still at positive energy
        ladder = E + np.arange(m_lo, sectors + 1)
        up = np.empty(len(ladder))
        down = np.empty(len(ladder))
        for i, Ei in enumerate(ladder):
            rp = rates_gaussian(GaussianTemp(Ei, gp.heat_capacity, mean, var, gp.statistic), gp.g2)
            up[i], down[i] = rp.up, rp.down
        pk = np.zeros(len(ladder))
        pk[-m_lo] = 1.0
        value, _ = _tilted_run(up, down, pe, pk, s, proto, False)
        total += weight * value
    return total


def jarzynski_expectation(config: SimulationConfig, **kw) -> float:
    """``<exp(-beta W)>``; exactly 1 whenever the bath obeys detailed balance."""
    return work_generating_function(config, config.beta, **kw)
