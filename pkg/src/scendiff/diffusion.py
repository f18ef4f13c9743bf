"""Variance schedules, forward noising, training loop, and reverse sampler.

The model is a denoising diffusion process over normalized day profiles
x in R^24: the forward chain adds Gaussian noise over n steps, the network
predicts the injected noise, and ancestral sampling runs the chain backwards
conditioned on the day's weather covariates.

The network itself operates in a model space affinely shifted to [-1, 1]
(z = 2x - 1 for normalized x): the terminal step of the forward chain is a
standard Gaussian centered at zero, and training targets whose support sits
entirely on one side of that center leave the sampler with a systematic
shrinkage bias toward zero. train() applies the map and the samplers invert
it, so every public interface keeps speaking normalized units.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from datetime import date
from pathlib import Path

import numpy as np

from . import nn
from .data import HOURS, Scaler
from .errors import (
    DimensionError,
    InsufficientDataError,
    ModelValidationError,
    ParameterError,
    SamplingDivergenceError,
    ScheduleTooShortError,
    TrainingDivergenceError,
)

TERMINAL_ALPHA_BAR = 0.01


def to_model_space(x: np.ndarray) -> np.ndarray:
    """Map normalized units onto the network's zero-centered target space."""
    return 2.0 * np.asarray(x, dtype=float) - 1.0


def from_model_space(z: np.ndarray) -> np.ndarray:
    """Inverse of to_model_space."""
    return 0.5 * (np.asarray(z, dtype=float) + 1.0)
SIGMA_MODES = ("beta", "posterior")


@dataclass
class Schedule:
    """Noise schedule: beta[i-1] is the step-i variance increment.

    sigma is the fixed reverse-process standard deviation per step:
    sigma_i^2 = beta_i ("beta" mode) or the posterior variance
    beta_i (1 - abar_{i-1}) / (1 - abar_i) ("posterior" mode).
    """

    kind: str
    n: int
    beta: np.ndarray
    alpha: np.ndarray
    alpha_bar: np.ndarray
    sigma: np.ndarray
    sigma_mode: str = "beta"

    def validate(self, enforce_terminal: bool = True) -> None:
        if self.n < 1 or self.beta.shape != (self.n,):
            raise ParameterError(f"schedule needs n >= 1 betas, got {self.beta.shape}")
        if np.any(self.beta <= 0) or np.any(self.beta >= 1):
            raise ParameterError("betas must lie in (0, 1)")
        if np.any(self.alpha + self.beta != 1.0):
            raise ParameterError("alpha + beta must equal 1 exactly")
        if np.any(np.diff(self.alpha_bar) >= 0):
            raise ParameterError("alpha_bar must be strictly decreasing")
        if enforce_terminal and self.alpha_bar[-1] >= TERMINAL_ALPHA_BAR:
            raise ScheduleTooShortError(
                f"terminal alpha_bar {self.alpha_bar[-1]:.6g} >= {TERMINAL_ALPHA_BAR}; "
                "raise n or the beta range"
            )

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "n": self.n,
            "beta": self.beta.tolist(),
            "sigma_mode": self.sigma_mode,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Schedule":
        return from_betas(np.asarray(d["beta"], dtype=float), kind=d["kind"],
                          sigma_mode=d["sigma_mode"], enforce_terminal=False)


def _sigma_from(beta: np.ndarray, alpha_bar: np.ndarray, sigma_mode: str) -> np.ndarray:
    if sigma_mode == "beta":
        return np.sqrt(beta)
    abar_prev = np.concatenate([[1.0], alpha_bar[:-1]])
    return np.sqrt(beta * (1.0 - abar_prev) / (1.0 - alpha_bar))


def from_betas(
    beta: np.ndarray, kind: str = "custom", sigma_mode: str = "beta",
    enforce_terminal: bool = True,
) -> Schedule:
    """Build a Schedule from an explicit beta vector."""
    if sigma_mode not in SIGMA_MODES:
        raise ParameterError(f"sigma_mode must be one of {SIGMA_MODES}")
    beta = np.asarray(beta, dtype=float)
    alpha = 1.0 - beta
    alpha_bar = np.cumprod(alpha)
    sched = Schedule(
        kind=kind, n=beta.size, beta=beta, alpha=alpha, alpha_bar=alpha_bar,
        sigma=_sigma_from(beta, alpha_bar, sigma_mode), sigma_mode=sigma_mode,
    )
    sched.validate(enforce_terminal=enforce_terminal)
    return sched


def make_schedule(
    kind: str = "linear", n: int = 200, beta_start: float = 1e-4, beta_end: float = 0.05,
    sigma_mode: str = "beta", enforce_terminal: bool = True,
) -> Schedule:
    """Linear or cosine variance schedule over n steps.

    Linear: beta_i = beta_start + (i-1)/(n-1) (beta_end - beta_start).
    Cosine: abar_i = f(i)/f(0) with f(i) = cos^2(((i/n + s)/(1 + s)) pi/2),
    s = 0.008, betas recovered from consecutive abar ratios and clipped to
    (1e-8, 0.999).

    The terminal marginal must be near-standard-normal: alpha_bar[n-1] must
    fall below 0.01 or a ScheduleTooShortError is raised. Pass
    enforce_terminal=False only for diagnostic/test schedules.
    """
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    if kind == "linear":
        if not 0 < beta_start <= beta_end < 1:
            raise ParameterError("need 0 < beta_start <= beta_end < 1")
        if n == 1:
            beta = np.array([beta_start])
        else:
            steps = np.arange(n, dtype=float)
            beta = beta_start + steps / (n - 1) * (beta_end - beta_start)
    elif kind == "cosine":
        s = 0.008
        i = np.arange(n + 1, dtype=float)
        f = np.cos(((i / n + s) / (1 + s)) * math.pi / 2) ** 2
        abar = f / f[0]
        beta = np.clip(1.0 - abar[1:] / abar[:-1], 1e-8, 0.999)
    else:
        raise ParameterError(f"kind must be linear or cosine, got {kind!r}")
    return from_betas(beta, kind=kind, sigma_mode=sigma_mode, enforce_terminal=enforce_terminal)


@dataclass
class ScenarioSet:
    """M generated day profiles for one target day, plus the condition used."""

    day_id: date
    m: int
    scenarios: np.ndarray
    condition: np.ndarray

    def validate(self) -> None:
        if self.m < 1:
            raise ParameterError("m must be >= 1")
        if self.scenarios.shape != (self.m, HOURS):
            raise DimensionError(f"scenarios shape {self.scenarios.shape} != ({self.m}, {HOURS})")
        if not np.all(np.isfinite(self.scenarios)):
            raise SamplingDivergenceError(f"non-finite scenario values for day {self.day_id}")


def forward_sample(x0: np.ndarray, i: int, eps: np.ndarray, sched: Schedule) -> np.ndarray:
    """Closed-form forward marginal: sqrt(abar_i) x0 + sqrt(1 - abar_i) eps."""
    if not 1 <= i <= sched.n:
        raise ParameterError(f"step {i} outside 1..{sched.n}")
    abar = sched.alpha_bar[i - 1]
    return math.sqrt(abar) * np.asarray(x0) + math.sqrt(1.0 - abar) * np.asarray(eps)


def chain_forward(x0: np.ndarray, sched: Schedule, rng: np.random.Generator) -> np.ndarray:
    """Step-by-step noising chain; returns the (n, L) stack of x_1..x_n.

    Marginally equivalent to forward_sample at every step.
    """
    x0 = np.asarray(x0, dtype=float)
    out = np.empty((sched.n, x0.size))
    x = x0
    for i in range(sched.n):
        z = rng.standard_normal(x0.size)
        x = math.sqrt(1.0 - sched.beta[i]) * x + math.sqrt(sched.beta[i]) * z
        out[i] = x
    return out


def training_loss(
    params, x0: np.ndarray, c: np.ndarray, sched: Schedule,
    rng: np.random.Generator | None = None, *,
    steps: np.ndarray | None = None, noise: np.ndarray | None = None,
    want_grads: bool = True,
):
    """Noise-prediction MSE over a batch and its parameter gradients.

    For each row a step is drawn uniformly from 1..n and a standard-normal
    noise vector is injected (both overridable for tests); the loss is
    mean over the batch of ||eps - eps_hat||^2 / L. `params` may also be a
    plain callable (x_noisy, steps, c) -> eps_hat, in which case gradients
    are skipped. Draw order from rng: steps first, then noise.
    """
    x0 = np.atleast_2d(np.asarray(x0, dtype=float))
    c = np.atleast_2d(np.asarray(c, dtype=float))
    b, l = x0.shape
    if b == 0:
        raise InsufficientDataError("empty batch")
    if rng is None and (steps is None or noise is None):
        raise ParameterError("need an rng unless both steps and noise are injected")
    if steps is None:
        steps = rng.integers(1, sched.n + 1, size=b)
    if noise is None:
        noise = rng.standard_normal((b, l))
    abar = sched.alpha_bar[np.asarray(steps) - 1]
    x_noisy = np.sqrt(abar)[:, None] * x0 + np.sqrt(1.0 - abar)[:, None] * noise
    if callable(params) and not isinstance(params, nn.DenoiserParams):
        eps_hat = params(x_noisy, steps, c)
        resid = eps_hat - noise
        loss = float(np.mean(resid**2))
        if not math.isfinite(loss):
            raise TrainingDivergenceError("non-finite loss")
        return loss, None
    eps_hat = nn.forward_batch(params, x_noisy, steps, c)
    resid = eps_hat - noise
    loss = float(np.mean(resid**2))
    if not math.isfinite(loss):
        raise TrainingDivergenceError("non-finite loss")
    grads = None
    if want_grads:
        grads = nn.backward_batch(params, x_noisy, steps, c, 2.0 * resid / (b * l))
    return loss, grads


@dataclass
class TrainConfig:
    epochs: int = 200
    batch_size: int = 64
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    hidden: tuple[int, ...] = (256, 256, 256)
    activation: str = "silu"
    embed_dim: int = 32
    seed: int = 0
    zone: int = 1


def train(ds, config: TrainConfig, sched: Schedule):
    """Minibatch noise-MSE training; returns (best params, per-epoch log).

    The checkpoint with the lowest validation loss wins; validation uses one
    fixed draw of steps and noise so epochs are compared on the same ruler.
    The log is a list of {epoch, learn_loss, val_loss} dicts, deterministic
    for a fixed config seed.
    """
    if ds.scaler is None:
        raise ParameterError("dataset must be normalized before training")
    x_learn, c_learn, _ = ds.arrays(split="learn", zone=config.zone)
    x_learn = to_model_space(x_learn)
    master = np.random.SeedSequence(config.seed)
    ss_init, ss_shuffle, ss_batch, ss_val = master.spawn(4)
    params = nn.init_params(
        hidden=tuple(config.hidden), sample_dim=x_learn.shape[1],
        embed_dim=config.embed_dim, cond_dim=c_learn.shape[1],
        seed=ss_init, activation=config.activation,
    )
    log: list[dict] = []
    if config.epochs == 0:
        return params, log

    val = ds.subset(split="validation", zone=config.zone)
    if not val:
        raise InsufficientDataError("validation split is empty")
    x_val = to_model_space(np.stack([s.x for s in val]))
    c_val = np.stack([s.c for s in val])
    rng_val = np.random.default_rng(ss_val)
    val_steps = rng_val.integers(1, sched.n + 1, size=x_val.shape[0])
    val_noise = rng_val.standard_normal(x_val.shape)

    rng_shuffle = np.random.default_rng(ss_shuffle)
    rng_batch = np.random.default_rng(ss_batch)
    state = nn.OptimizerState.for_params(
        params, lr=config.lr, beta1=config.beta1, beta2=config.beta2, eps=config.eps,
    )
    best_params = params.copy()
    best_val = math.inf
    n = x_learn.shape[0]
    for epoch in range(1, config.epochs + 1):
        order = rng_shuffle.permutation(n)
        losses = []
        for lo in range(0, n, config.batch_size):
            idx = order[lo : lo + config.batch_size]
            try:
                loss, grads = training_loss(
                    params, x_learn[idx], c_learn[idx], sched, rng_batch,
                )
                params, state = nn.adam_step(state, params, grads)
            except TrainingDivergenceError as e:
                raise TrainingDivergenceError(f"epoch {epoch}: {e}") from None
            losses.append(loss)
        val_loss, _ = training_loss(
            params, x_val, c_val, sched, steps=val_steps, noise=val_noise, want_grads=False,
        )
        log.append({"epoch": epoch, "learn_loss": float(np.mean(losses)), "val_loss": val_loss})
        if val_loss < best_val:
            best_val = val_loss
            best_params = params.copy()
    return best_params, log


def _reverse_engine(denoiser, c_rows: np.ndarray, sched: Schedule,
                    seed_seqs, l: int, chunk: int = 2048) -> np.ndarray:
    """Ancestral sampling for many (condition, stream) rows at once.

    Each row has its own RNG stream drawing, in order, the initial noise and
    then one z vector per reverse step from n down to 2. Rows are processed
    in chunks so the per-step noise block stays small.
    """
    r = c_rows.shape[0]
    out = np.empty((r, l))
    for lo in range(0, r, chunk):
        hi = min(lo + chunk, r)
        rows = hi - lo
        x = np.empty((rows, l))
        z = np.empty((rows, max(sched.n - 1, 0), l))
        for j in range(rows):
            rng = np.random.default_rng(seed_seqs[lo + j])
            x[j] = rng.standard_normal(l)
            if sched.n > 1:
                z[j] = rng.standard_normal((sched.n - 1, l))
        c_chunk = c_rows[lo:hi]
        for i in range(sched.n, 0, -1):
            if callable(denoiser) and not isinstance(denoiser, nn.DenoiserParams):
                eps_hat = denoiser(x, np.full(rows, i), c_chunk)
            else:
                eps_hat = nn.forward_batch(denoiser, x, np.full(rows, i), c_chunk)
            coef = sched.beta[i - 1] / math.sqrt(1.0 - sched.alpha_bar[i - 1])
            x = (x - coef * eps_hat) / math.sqrt(sched.alpha[i - 1])
            if i > 1:
                x = x + sched.sigma[i - 1] * z[:, sched.n - i]
            if not np.all(np.isfinite(x)):
                raise SamplingDivergenceError(f"non-finite sample at step {i}")
        out[lo:hi] = x
    return out


def reverse_chain(denoiser, c: np.ndarray, sched: Schedule, m: int, seed, l: int) -> np.ndarray:
    """Draw m normalized samples for one condition; returns an (m, l) array.

    `seed` may be an int or a SeedSequence; per-sample independent streams
    are spawned from it, so samples are reproducible and order-independent.
    """
    if m < 1:
        raise ParameterError("m must be >= 1")
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    children = ss.spawn(m)
    c_rows = np.repeat(np.atleast_2d(np.asarray(c, dtype=float)), m, axis=0)
    return _reverse_engine(denoiser, c_rows, sched, children, l)


def reverse_sample(params, c: np.ndarray, sched: Schedule, m: int, seed,
                   scaler: Scaler | None = None, day_id: date | None = None) -> ScenarioSet:
    """Generate a day's scenario set, denormalized, clipped, and with
    learn-split-constant hours pinned when a scaler is given; otherwise
    values stay in normalized units."""
    x = from_model_space(reverse_chain(params, c, sched, m, seed, HOURS))
    if scaler is not None:
        x = scaler.inverse_target(x)
        lo, hi = scaler.physical_bounds()
        x = scaler.pin_fixed(np.clip(x, lo, hi))
    result = ScenarioSet(day_id=day_id or date(1970, 1, 1), m=m, scenarios=x,
                         condition=np.asarray(c, dtype=float).copy())
    result.validate()
    return result


def sample_days(params, conditions: np.ndarray, day_ids, sched: Schedule, m: int, seed,
                scaler: Scaler | None = None) -> list[ScenarioSet]:
    """Scenario sets for many days in one batched pass.

    Day d's streams come from spawning the master seed into one child per
    day and then m grandchildren, so each day's set matches a standalone
    reverse_sample call made with that day's child sequence.
    """
    conditions = np.atleast_2d(np.asarray(conditions, dtype=float))
    d = conditions.shape[0]
    if len(day_ids) != d:
        raise DimensionError(f"{len(day_ids)} day ids for {d} condition rows")
    master = np.random.SeedSequence(seed) if not isinstance(seed, np.random.SeedSequence) else seed
    day_seqs = master.spawn(d)
    seqs = [s for ds_ in day_seqs for s in ds_.spawn(m)]
    c_rows = np.repeat(conditions, m, axis=0)
    x = from_model_space(_reverse_engine(params, c_rows, sched, seqs, HOURS))
    if scaler is not None:
        x = scaler.inverse_target(x)
        lo, hi = scaler.physical_bounds()
        x = scaler.pin_fixed(np.clip(x, lo, hi))
    out = []
    for j in range(d):
        s = ScenarioSet(day_id=day_ids[j], m=m, scenarios=x[j * m : (j + 1) * m],
                        condition=conditions[j].copy())
        s.validate()
        out.append(s)
    return out


CHECKPOINT_MAGIC = "scendiff-checkpoint"


def save_checkpoint(path: str | Path, params: nn.DenoiserParams, sched: Schedule,
                    scaler: Scaler | None, track: str, zone: int) -> None:
    """Write a model file: one JSON header line, then the raw parameter block.

    The block is little-endian float64, layer-major, weights before biases,
    row-major matrices.
    """
    header = {
        "format": CHECKPOINT_MAGIC,
        "version": 1,
        "track": track,
        "zone": zone,
        "sample_dim": params.sample_dim,
        "embed_dim": params.embed_dim,
        "cond_dim": params.cond_dim,
        "activation": params.activation,
        "hidden": [w.shape[0] for w, _ in params.layers[:-1]],
        "n_params": params.n_params,
        "schedule": sched.to_dict(),
        "scaler": scaler.to_dict() if scaler else None,
    }
    vec = nn.params_to_vector(params).astype("<f8")
    with open(path, "wb") as f:
        f.write(json.dumps(header).encode("utf-8"))
        f.write(b"\n")
        f.write(vec.tobytes())


def load_checkpoint(path: str | Path):
    """Read a model file; returns (params, schedule, scaler, header dict).

    Raises ModelValidationError on a malformed header or a parameter block
    whose length disagrees with the declared architecture.
    """
    raw = Path(path).read_bytes()
    nl = raw.find(b"\n")
    if nl < 0:
        raise ModelValidationError(f"{path}: missing header line")
    try:
        header = json.loads(raw[:nl].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ModelValidationError(f"{path}: bad header: {e}") from None
    if header.get("format") != CHECKPOINT_MAGIC:
        raise ModelValidationError(f"{path}: not a model checkpoint")
    block = raw[nl + 1 :]
    n_params = int(header["n_params"])
    if len(block) != 8 * n_params:
        raise ModelValidationError(
            f"{path}: parameter block is {len(block)} bytes, expected {8 * n_params}"
        )
    vec = np.frombuffer(block, dtype="<f8").astype(float)
    sizes = [int(header["sample_dim"]) + int(header["embed_dim"]) + int(header["cond_dim"])]
    sizes += [int(h) for h in header["hidden"]]
    sizes.append(int(header["sample_dim"]))
    template_layers = [
        (np.zeros((fan_out, fan_in)), np.zeros(fan_out))
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:])
    ]
    template = nn.DenoiserParams(
        layers=template_layers, activation=header["activation"],
        sample_dim=int(header["sample_dim"]), embed_dim=int(header["embed_dim"]),
        cond_dim=int(header["cond_dim"]),
    )
    if template.n_params != n_params:
        raise ModelValidationError(f"{path}: architecture does not match n_params")
    params = nn.vector_to_params(vec, template)
    params.validate()
    sched = Schedule.from_dict(header["schedule"])
    scaler = Scaler.from_dict(header["scaler"]) if header.get("scaler") else None
    return params, sched, scaler, header


def write_scenarios(sets: list[ScenarioSet], path: str | Path) -> None:
    """CSV `day,scenario,h0..h23` in physical units, scenarios numbered 1..M."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["day", "scenario"] + [f"h{h}" for h in range(HOURS)])
        for s in sets:
            for m in range(s.m):
                writer.writerow(
                    [s.day_id.isoformat(), m + 1]
                    + [format(v, ".17g") for v in s.scenarios[m]]
                )


def read_scenarios(path: str | Path) -> dict[date, np.ndarray]:
    """Inverse of write_scenarios: {day: (M, 24) array}."""
    from .errors import IntegrityError, SchemaError

    rows: dict[date, list] = {}
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader)
        if header != ["day", "scenario"] + [f"h{h}" for h in range(HOURS)]:
            raise SchemaError(f"{path}: bad scenario header")
        for row_no, row in enumerate(reader, start=2):
            if not row:
                continue
            day = date.fromisoformat(row[0])
            rows.setdefault(day, []).append((int(row[1]), [float(v) for v in row[2:]]))
    out = {}
    for day, entries in rows.items():
        entries.sort(key=lambda e: e[0])
        if [e[0] for e in entries] != list(range(1, len(entries) + 1)):
            raise IntegrityError(f"{path}: day {day} scenario numbering is not 1..M")
        out[day] = np.array([e[1] for e in entries])
    return out
