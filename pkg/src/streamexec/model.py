"""Closed-form latency model for pipelined generate-and-execute runs.

All times are milliseconds (real-valued); generation speed is tokens per
second. The serial baseline, the parallel completion recurrence, its closed
form, upper/lower bounds, the speedup bound, the uniform-chunk regime split,
and the critical chunk count are all pure functions of the parameters.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass


class ParameterError(ValueError):
    """Raised when model parameters violate their invariants."""


@dataclass(frozen=True)
class ModelParams:
    """Inputs of the latency model.

    L: total token count; v_gen: tokens/second; T_FT: time to first token (ms);
    N: chunk count; l: per-chunk token counts; delta: per-chunk residual
    detection delay (ms); T_setup: per-call execution overhead (ms); T_exe:
    per-chunk execution time (ms); T_setup_full / T_exe_full: one-shot setup
    and execution time of the whole program (ms).
    """

    L: float
    v_gen: float
    T_FT: float
    N: int
    l: tuple[float, ...]
    delta: tuple[float, ...]
    T_setup: float
    T_exe: tuple[float, ...]
    T_setup_full: float
    T_exe_full: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "l", tuple(self.l))
        object.__setattr__(self, "delta", tuple(self.delta))
        object.__setattr__(self, "T_exe", tuple(self.T_exe))
        if self.N < 1:
            raise ParameterError("N must be >= 1")
        if not (self.N == len(self.l) == len(self.delta) == len(self.T_exe)):
            raise ParameterError("N must equal len(l), len(delta) and len(T_exe)")
        if self.v_gen <= 0:
            raise ParameterError("v_gen must be positive")
        if abs(sum(self.l) - self.L) > 1e-9 * max(1.0, abs(self.L)):
            raise ParameterError("sum(l) must equal L")
        for name in ("L", "T_FT", "T_setup", "T_setup_full", "T_exe_full"):
            if getattr(self, name) < 0:
                raise ParameterError(f"{name} must be >= 0")
        if any(x < 0 for x in self.l + self.delta + self.T_exe):
            raise ParameterError("l, delta and T_exe entries must be >= 0")


@dataclass(frozen=True)
class Schedule:
    """Per-chunk completion times of the parallel run (all ms)."""

    t_g: tuple[float, ...]
    t_d: tuple[float, ...]
    t_e: tuple[float, ...]

    @property
    def T_parallel(self) -> float:
        return self.t_e[-1]


class Regime(enum.Enum):
    R1_GENERATION_DOMINATED = "R1_generation_dominated"
    R2_EXECUTION_DOMINATED = "R2_execution_dominated"
    R3_BALANCED = "R3_balanced"


@dataclass(frozen=True)
class UniformParams:
    """Uniform-chunk special case: alpha is the per-chunk generation time and
    beta = T_setup + per-chunk execution time, both in ms."""

    N: int
    alpha: float
    beta: float
    delta: float
    T_FT: float
    L_over_v: float

    def __post_init__(self) -> None:
        if self.N < 1:
            raise ParameterError("N must be >= 1")
        if self.alpha < 0 or self.beta < 0:
            raise ParameterError("alpha and beta must be >= 0")


@dataclass(frozen=True)
class UniformLatency:
    regime: Regime
    T_parallel: float


def _gen_ms(tokens: float, v_gen: float) -> float:
    return 1000.0 * tokens / v_gen


def t_serial(p: ModelParams) -> float:
    """Latency of generate-everything-then-execute-once."""
    return p.T_FT + _gen_ms(p.L, p.v_gen) + p.T_setup_full + p.T_exe_full


def parallel_schedule(p: ModelParams) -> Schedule:
    """Unrolled completion times: chunk i starts executing once it is
    detected and the previous chunk has finished."""
    cum = itertools.accumulate(p.l)
    t_g = tuple(p.T_FT + _gen_ms(c, p.v_gen) for c in cum)
    t_d = tuple(g + d for g, d in zip(t_g, p.delta))
    t_e = []
    prev = 0.0
    for i in range(p.N):
        prev = max(t_d[i], prev) + p.T_setup + p.T_exe[i]
        t_e.append(prev)
    return Schedule(t_g=t_g, t_d=t_d, t_e=tuple(t_e))


def parallel_closed_form(p: ModelParams) -> float:
    """max over i of (generation prefix + detection delay + execution tail)."""
    cum = 0.0
    best = 0.0
    tail = p.N * p.T_setup + sum(p.T_exe)
    for i in range(p.N):
        cum += p.l[i]
        term = p.T_FT + _gen_ms(cum, p.v_gen) + p.delta[i] + tail
        best = max(best, term)
        tail -= p.T_setup + p.T_exe[i]
    return best


def upper_bound(p: ModelParams) -> float:
    """Zero-overlap cost: every stage waits for its predecessor entirely."""
    delta_bar = max(p.delta)
    return p.T_FT + _gen_ms(p.L, p.v_gen) + delta_bar + p.N * p.T_setup + sum(p.T_exe)


def overhead_bound(p: ModelParams) -> float:
    """Worst-case extra cost of the pipeline over the serial baseline:
    residual detection plus repeated per-chunk setup."""
    return max(p.delta) + p.N * p.T_setup - p.T_setup_full


@dataclass(frozen=True)
class LowerBound:
    gen_bound: float
    exec_bound: float

    @property
    def composite(self) -> float:
        return max(self.gen_bound, self.exec_bound)


def lower_bound(p: ModelParams) -> LowerBound:
    """Two structural floors: all tokens must be generated before the last
    chunk completes; all chunks must execute in order after the first one
    becomes available."""
    gen = p.T_FT + _gen_ms(p.L, p.v_gen) + p.delta[-1] + p.T_setup + p.T_exe[-1]
    exec_ = p.T_FT + _gen_ms(p.l[0], p.v_gen) + p.delta[0] + p.N * p.T_setup + sum(p.T_exe)
    return LowerBound(gen_bound=gen, exec_bound=exec_)


def speedup_upper_bound(p: ModelParams) -> float:
    """Best achievable serial/parallel ratio: all execution hidden behind
    generation except the last chunk."""
    gen = lower_bound(p).gen_bound
    if gen <= 0:
        raise ParameterError("generation lower bound must be positive")
    return t_serial(p) / gen


def uniform_latency(u: UniformParams) -> UniformLatency:
    """Regime split for uniform chunks: the inner closed-form term is affine
    in the chunk index, so the maximum sits at one of the ends."""
    if u.alpha > u.beta:
        return UniformLatency(
            Regime.R1_GENERATION_DOMINATED, u.T_FT + u.L_over_v + u.delta + u.beta
        )
    if u.alpha < u.beta:
        return UniformLatency(
            Regime.R2_EXECUTION_DOMINATED, u.T_FT + u.alpha + u.delta + u.N * u.beta
        )
    return UniformLatency(Regime.R3_BALANCED, u.T_FT + u.L_over_v + u.delta + u.beta)


def n_star(L_over_v: float, T_exe_full: float, T_setup: float) -> float:
    """Critical chunk count where per-chunk generation and execution pace
    match; may be <= 0 when execution outweighs generation."""
    if T_setup <= 0:
        raise ParameterError("n_star is undefined for T_setup <= 0")
    return (L_over_v - T_exe_full) / T_setup


def uniform_to_params(u: UniformParams, tau_e: float | None = None) -> ModelParams:
    """Expand uniform parameters into an equivalent ModelParams instance.

    tau_e defaults to beta (setup folded to zero); pass the true per-chunk
    execution time to keep a nonzero T_setup = beta - tau_e.
    """
    if tau_e is None:
        tau_e = u.beta
    t_setup = u.beta - tau_e
    if t_setup < 0:
        raise ParameterError("tau_e must not exceed beta")
    v_gen = 1000.0
    l_i = u.alpha * v_gen / 1000.0
    return ModelParams(
        L=l_i * u.N,
        v_gen=v_gen,
        T_FT=u.T_FT,
        N=u.N,
        l=(l_i,) * u.N,
        delta=(u.delta,) * u.N,
        T_setup=t_setup,
        T_exe=(tau_e,) * u.N,
        T_setup_full=0.0,
        T_exe_full=tau_e * u.N,
    )
