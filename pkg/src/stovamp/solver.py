"""VAMP and Stochastic VAMP for magnitude observations of several blocks.

The model is ``z_l = A_l x`` and ``y_l ~ p_out(. | |z_l|)`` for blocks
``l = 0..L-1``.  The solver keeps one input-side message ``(r2, gamma2)``
and one output-side message ``(p2_l, tau2_l)`` per block.  Each inner step
runs an LMMSE estimate over all blocks, sends extrinsic messages to the
denoisers (damped), denoises, and sends extrinsic messages back.

The ``sequential`` schedule performs one inner step per block, refreshing
the global quantities between blocks.  The ``parallel`` schedule updates all
blocks from one LMMSE estimate.  :func:`vamp_run` is the classic algorithm:
a single stacked block with one shared output precision.
"""

from __future__ import annotations

import contextlib
import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .core import (
    PREC_MAX,
    PREC_MIN,
    CapabilityError,
    ComplexVector,
    ConfigError,
    DimensionError,
    GaussianMessage,
    NumericalError,
    RngHandle,
    damped_update,
    ep_extrinsic,
)
from .denoisers import DenoiserResult, GaussianPrior, RicianChannel
from .metrics import TraceRecord, nmse_db
from .sensing import SensingOperator, StackedOperator

log = logging.getLogger(__name__)

SCHEDULES = ("sequential", "parallel")
BLOCK_ORDERS = ("fixed", "random")
NEGATIVE_PRECISION = ("reflect", "clamp")


@dataclass
class SolverConfig:
    """Run parameters.

    ``tau_init`` is either ``"inverse_energy"`` (``1 / mean(y^2)`` per
    block) or a positive number used for every block.

    ``negative_precision`` picks what happens when an extrinsic precision
    comes out non-positive.  ``"clamp"`` sends the belief mean with the
    minimum precision, which discards that block's information.
    ``"reflect"`` keeps the signed mean formula and sends ``|precision|``;
    the early negative precisions of the classic algorithm then do no harm.

    ``record_time=False``
    writes zero wall times, which makes traces reproducible byte for byte.
    """

    iterations: int = 100
    damping: float = 1.0
    schedule: str = "sequential"
    block_order: str = "fixed"
    early_stop: float = 0.0
    tau_init: object = "inverse_energy"
    negative_precision: str = "reflect"
    record_time: bool = True

    def __post_init__(self):
        if int(self.iterations) < 1:
            raise ConfigError(f"iterations must be >= 1, got {self.iterations}")
        if not 0.0 < self.damping <= 1.0:
            raise ConfigError(f"damping must lie in (0, 1], got {self.damping}")
        if self.schedule not in SCHEDULES:
            raise ConfigError(f"schedule must be one of {SCHEDULES}, got {self.schedule!r}")
        if self.block_order not in BLOCK_ORDERS:
            raise ConfigError(f"block_order must be one of {BLOCK_ORDERS}, got {self.block_order!r}")
        if self.negative_precision not in NEGATIVE_PRECISION:
            raise ConfigError(f"negative_precision must be one of {NEGATIVE_PRECISION}, got {self.negative_precision!r}")
        if self.early_stop < 0:
            raise ConfigError("early_stop must be >= 0")
        if self.tau_init != "inverse_energy":
            try:
                ok = float(self.tau_init) > 0
            except (TypeError, ValueError):
                ok = False
            if not ok:
                raise ConfigError(f"tau_init must be 'inverse_energy' or a positive number, got {self.tau_init!r}")


@dataclass
class SolverState:
    """All messages of a run.

    ``r1`` and ``p1`` hold the previous denoiser-bound messages used for
    damping; they are ``None`` until first computed.
    """

    r2: GaussianMessage
    p2: list[GaussianMessage]
    r1: Optional[GaussianMessage] = None
    p1: list[Optional[GaussianMessage]] = field(default_factory=list)
    x1: Optional[ComplexVector] = None
    eta1: float = float("nan")
    iteration: int = 0

    def __post_init__(self):
        if not self.p2:
            raise DimensionError("state needs at least one block")
        if not self.p1:
            self.p1 = [None] * len(self.p2)
        if self.x1 is None:
            self.x1 = np.array(self.r2.mean)

    @property
    def num_blocks(self) -> int:
        return len(self.p2)

    def precisions(self) -> list[float]:
        out = [self.r2.precision] + [m.precision for m in self.p2]
        if self.r1 is not None:
            out.append(self.r1.precision)
        out += [m.precision for m in self.p1 if m is not None]
        return out


@dataclass
class LmmseResult:
    x2: ComplexVector
    eta2: float
    z2: list[ComplexVector]
    lambda2: list[float]


def _gram(op: SensingOperator) -> np.ndarray:
    if not op.diagonal_gram:
        raise CapabilityError(f"{type(op).__name__} does not have a diagonal Gram matrix")
    return op.gram_diagonal()


def lmmse_update(r2: GaussianMessage, blocks: Sequence[tuple[SensingOperator, GaussianMessage]],
                 active, adjoint_sum: Optional[ComplexVector] = None) -> LmmseResult:
    """Joint Gaussian estimate of ``x`` from ``r2`` and every block's ``p2``.

    ``active`` is a block index or a sequence of indices; ``z2`` and
    ``lambda2`` are returned for those blocks only, in that order.
    ``adjoint_sum`` may carry a precomputed ``sum_l tau2_l A_l^H p2_l``.
    """
    if isinstance(active, (int, np.integer)):
        active = [int(active)]
    n = len(r2)
    d = np.zeros(n)
    for op, msg in blocks:
        if op.input_dim != n or op.output_dim != len(msg):
            raise DimensionError(f"block of shape {op.shape} does not match N={n}, Mbar={len(msg)}")
        d += msg.precision * _gram(op)
    if adjoint_sum is None:
        adjoint_sum = np.zeros(n, dtype=np.complex128)
        for op, msg in blocks:
            adjoint_sum = adjoint_sum + msg.precision * op.adjoint(msg.mean)
    q = 1.0 / (r2.precision + d)
    x2 = q * (r2.precision * r2.mean + adjoint_sum)
    eta2 = 1.0 / float(np.mean(q))
    z2, lam2 = [], []
    for l in active:
        op = blocks[l][0]
        z2.append(op.apply(x2))
        lam2.append(op.output_dim / op.row_gram_trace(q))
    return LmmseResult(x2, eta2, z2, lam2)


def denoise_input(state: SolverState, prior) -> DenoiserResult:
    return prior.denoise(state.r1.mean, state.r1.precision)


def denoise_output(state: SolverState, channel, block: int, y) -> DenoiserResult:
    msg = state.p1[block]
    return channel.denoise(msg.mean, msg.precision, y)


def initialize_state(operators: Sequence[SensingOperator], observations: Sequence,
                     config: SolverConfig, rng: RngHandle,
                     prior: Optional[GaussianPrior] = None) -> SolverState:
    """Random start: ``r2 = 0`` with the prior precision, ``p2_l = y_l`` with uniform random phases.

    All random phases are drawn here, block by block, before any iteration.
    """
    prior = prior or GaussianPrior()
    _check_problem(operators, observations)
    n = operators[0].input_dim
    r2 = GaussianMessage(np.zeros(n, dtype=np.complex128), 1.0 / prior.variance)
    gen = rng.generator
    p2 = []
    for y in observations:
        y = np.asarray(y, dtype=np.float64)
        phi = gen.uniform(0.0, 2 * np.pi, size=y.size)
        if config.tau_init == "inverse_energy":
            energy = float(np.mean(y * y))
            # all-zero data would give infinite precision; fall back to 1
            tau = 1.0 / energy if energy > 0 and 1.0 / energy < PREC_MAX else 1.0
        else:
            tau = float(config.tau_init)
        p2.append(GaussianMessage(y * np.exp(1j * phi), tau))
    return SolverState(r2=r2, p2=p2)


def _check_problem(operators, observations):
    if len(operators) < 1:
        raise DimensionError("need at least one sensing operator")
    if len(operators) != len(observations):
        raise DimensionError(f"{len(operators)} operators but {len(observations)} observation blocks")
    n = operators[0].input_dim
    for l, (op, y) in enumerate(zip(operators, observations)):
        if op.input_dim != n:
            raise DimensionError(f"block {l + 1}: input dimension {op.input_dim} != {n}")
        if np.shape(y) != (op.output_dim,):
            raise DimensionError(f"block {l + 1}: observation shape {np.shape(y)} != ({op.output_dim},)")


@contextlib.contextmanager
def _where(what: str, k: int, block: Optional[int] = None):
    try:
        yield
    except NumericalError as exc:
        loc = f"iteration {k}" + (f", block {block + 1}" if block is not None else "")
        raise NumericalError(f"{what} became non-finite at {loc}: {exc}") from exc


class _Engine:
    """Holds the problem, the state and the cached adjoint terms of one run."""

    def __init__(self, operators, observations, prior, channel, config, state):
        self.ops = list(operators)
        self.ys = [np.asarray(y, dtype=np.float64) for y in observations]
        self.prior = prior
        self.channel = channel
        self.cfg = config
        self.state = state
        if state.num_blocks != len(self.ops):
            raise DimensionError(f"state has {state.num_blocks} blocks, problem has {len(self.ops)}")
        # tau2_l * A_l^H p2_l per block, and their running sum
        self.adj = [m.precision * op.adjoint(m.mean) for op, m in zip(self.ops, state.p2)]
        self.adj_sum = sum(self.adj[1:], self.adj[0])

    def refresh_adjoint(self, l: int):
        new = self.state.p2[l].precision * self.ops[l].adjoint(self.state.p2[l].mean)
        if not np.all(np.isfinite(new)):
            raise NumericalError("adjoint term")
        # one subtraction and one addition instead of an L-term sum
        self.adj_sum = new if len(self.adj) == 1 else self.adj_sum + (new - self.adj[l])
        self.adj[l] = new

    def extrinsic(self, belief_mean, belief_prec, incoming: GaussianMessage) -> GaussianMessage:
        raw = belief_prec - incoming.precision
        if raw < -PREC_MIN and self.cfg.negative_precision == "reflect":
            mean = (belief_prec * np.asarray(belief_mean) - incoming.precision * incoming.mean) / raw
            if not np.all(np.isfinite(mean)):
                raise NumericalError("non-finite extrinsic mean")
            return GaussianMessage(mean, -raw)
        return ep_extrinsic(belief_mean, belief_prec, incoming.mean, incoming.precision)

    def step(self, active: Sequence[int], k: int):
        st, rho = self.state, self.cfg.damping
        blocks = list(zip(self.ops, st.p2))
        with _where("LMMSE estimate", k):
            res = lmmse_update(st.r2, blocks, active, adjoint_sum=self.adj_sum)
            # observations can only add information
            if res.eta2 < st.r2.precision * (1 - 1e-12) or min(res.lambda2) < 0:
                raise NumericalError(f"eta2={res.eta2} below gamma2={st.r2.precision}")

        # messages toward the denoisers (damped)
        with _where("r1", k):
            st.r1 = damped_update(self.extrinsic(res.x2, res.eta2, st.r2), st.r1, rho)
        for l, z2, lam2 in zip(active, res.z2, res.lambda2):
            with _where("p1", k, l):
                raw = self.extrinsic(z2, lam2, st.p2[l])
                st.p1[l] = damped_update(raw, st.p1[l], rho)

        # denoising and messages back toward the LMMSE stage
        with _where("x1", k):
            dx = denoise_input(st, self.prior)
            st.r2 = self.extrinsic(dx.mean, dx.precision, st.r1)
        st.x1 = dx.mean
        st.eta1 = dx.precision
        for l in active:
            with _where("p2", k, l):
                dz = denoise_output(st, self.channel, l, self.ys[l])
                st.p2[l] = self.extrinsic(dz.mean, dz.precision, st.p1[l])
                self.refresh_adjoint(l)


def stochastic_vamp_run(x_true, operators: Sequence[SensingOperator], observations: Sequence,
                        prior, channel: RicianChannel, config: SolverConfig, rng: RngHandle,
                        init: Optional[SolverState] = None,
                        callback: Optional[Callable[[SolverState, int, Sequence[int]], None]] = None):
    """Run Stochastic VAMP; returns ``(x1, trace)``.

    ``x_true`` (optional) enables NMSE in the trace.  ``init`` overrides the
    random initial state.  ``callback(state, k, active_blocks)`` runs after
    every inner step.
    """
    _check_problem(operators, observations)
    L = len(operators)
    if init is None:
        init = initialize_state(operators, observations, config, rng, prior)
    if x_true is not None:
        x_true = np.asarray(x_true, dtype=np.complex128)
    eng = _Engine(operators, observations, prior, channel, config, init)
    st = eng.state
    gen = rng.generator
    clock = time.perf_counter if config.record_time else (lambda: 0.0)
    t0 = clock()
    trace: list[TraceRecord] = []

    for k in range(int(config.iterations)):
        st.iteration = k
        order = list(range(L))
        if config.block_order == "random":
            order = [int(i) for i in gen.permutation(L)]
        groups = [[l] for l in order] if config.schedule == "sequential" else [order]
        x_prev = st.x1
        for active in groups:
            eng.step(active, k)
            if callback is not None:
                callback(st, k, active)
            err = nmse_db(x_true, st.x1) if x_true is not None else None
            elapsed = (clock() - t0) * 1e3
            for l in active:
                trace.append(TraceRecord(k, l + 1, err, st.eta1, st.r1.precision, st.p1[l].precision, elapsed))
        if config.early_stop > 0:
            ref = float(np.linalg.norm(x_prev))
            if ref > 0 and np.linalg.norm(st.x1 - x_prev) / ref < config.early_stop:
                log.debug("early stop after iteration %d", k)
                break
    return st.x1, trace


def vamp_run(x_true, operators: Sequence[SensingOperator], observations: Sequence,
             prior, channel: RicianChannel, config: SolverConfig, rng: RngHandle,
             init: Optional[SolverState] = None, callback=None):
    """Classic VAMP on the stacked operator and observations.

    All blocks share one output-side message, hence one precision.  The
    schedule in ``config`` is ignored (a single block has nothing to order).
    """
    _check_problem(operators, observations)
    if len(operators) == 1:
        op, y = operators[0], observations[0]
    else:
        op = StackedOperator(operators)
        y = np.concatenate([np.asarray(v, dtype=np.float64) for v in observations])
    cfg = SolverConfig(**{**config.__dict__, "schedule": "parallel", "block_order": "fixed"})
    return stochastic_vamp_run(x_true, [op], [y], prior, channel, cfg, rng, init=init, callback=callback)
