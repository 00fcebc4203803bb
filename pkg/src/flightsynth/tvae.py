"""Tabular variational autoencoder in plain numpy (float64).

Encoder ``x -> hidden (ReLU) -> (mu, log sigma^2)``, reparameterized latent
``z = mu + sigma * eps``, decoder ``z -> hidden (ReLU) -> heads``.  Heads
follow the encoder-state layout: continuous scalars get a Gaussian
likelihood with a learned per-column variance, one-hot blocks a softmax
cross-entropy.  The loss is the negative ELBO averaged over the batch and
gradients are derived by hand; :func:`gradient_self_check` compares them
with central finite differences.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import log_softmax, softmax

from .encode import Block, EncoderState, decode, encode, fit_encoder, split_missing
from .numkit import rng_stream
from .table import Table

log = logging.getLogger(__name__)

VAR_FLOOR = 1e-6
ACTIVE_KL = 0.01
_LOG_2PI = math.log(2 * math.pi)


class TvaeError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    epochs: int = 300
    lr: float = 1e-3
    batch_size: int = 500
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 1e-5
    seed: int = 0
    hidden: tuple[int, ...] = (128, 128)
    latent: int = 128
    mode_normalize: bool = False
    kl_warmup: bool = False
    self_check: bool = True
    trace_path: str | None = None

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not 0 < self.lr < 1:
            raise ValueError("learning rate must lie in (0, 1)")
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")
        if self.latent < 1:
            raise ValueError("latent dimension must be >= 1")


# -- parameters ---------------------------------------------------------------
def _layer_names(prefix: str, n: int) -> list[str]:
    return [f"{prefix}{i}" for i in range(n)]


def init_params(n_in: int, n_out: int, n_cont: int, hidden, latent: int, rng) -> dict[str, np.ndarray]:
    """Uniform(+-1/sqrt(fan_in)) weights and biases."""
    def dense(fan_in, fan_out):
        bound = 1.0 / math.sqrt(fan_in)
        return rng.uniform(-bound, bound, (fan_in, fan_out)), rng.uniform(-bound, bound, fan_out)

    p: dict[str, np.ndarray] = {}
    width = n_in
    for name, h in zip(_layer_names("enc", len(hidden)), hidden):
        p[name + ".W"], p[name + ".b"] = dense(width, h)
        width = h
    p["mu.W"], p["mu.b"] = dense(width, latent)
    p["logvar.W"], p["logvar.b"] = dense(width, latent)
    width = latent
    for name, h in zip(_layer_names("dec", len(hidden)), hidden):
        p[name + ".W"], p[name + ".b"] = dense(width, h)
        width = h
    p["out.W"], p["out.b"] = dense(width, n_out)
    p["out.logvar"] = np.zeros(n_cont)
    return p


@dataclass
class Heads:
    """Decoder output layout: continuous columns and softmax blocks."""

    width: int
    continuous: np.ndarray  # indices into the output vector
    softmax: list[tuple[int, int]]  # (start, width)

    @classmethod
    def from_blocks(cls, blocks: list[Block]) -> "Heads":
        cont, soft, width = [], [], 0
        for b in blocks:
            if b.kind == "continuous":
                cont.extend(range(b.start, b.start + b.width))
            else:
                soft.append((b.start, b.width))
            width = max(width, b.start + b.width)
        return cls(width, np.array(cont, dtype=np.int64), soft)


@dataclass
class TvaeModel:
    params: dict[str, np.ndarray]
    heads: Heads
    hidden: tuple[int, ...]
    latent: int
    encoder: EncoderState | None = None
    config: TrainConfig | None = None
    trace: list[dict] = field(default_factory=list)

    def check_shapes(self) -> None:
        p = self.params
        width = self.heads.width
        for name in _layer_names("enc", len(self.hidden)):
            if p[name + ".W"].shape[0] != width:
                raise TvaeError(f"layer {name}: input width {p[name + '.W'].shape[0]} != {width}")
            width = p[name + ".W"].shape[1]
        for head in ("mu", "logvar"):
            if p[head + ".W"].shape != (width, self.latent):
                raise TvaeError(f"{head} head has shape {p[head + '.W'].shape}")
        width = self.latent
        for name in _layer_names("dec", len(self.hidden)):
            if p[name + ".W"].shape[0] != width:
                raise TvaeError(f"layer {name}: input width mismatch")
            width = p[name + ".W"].shape[1]
        if p["out.W"].shape != (width, self.heads.width):
            raise TvaeError("output layer does not match the block layout")
        if p["out.logvar"].shape != (len(self.heads.continuous),):
            raise TvaeError("continuous variance vector has the wrong length")

    def to_json(self) -> dict:
        return {
            "kind": "tvae",
            "hidden": list(self.hidden),
            "latent": self.latent,
            "heads": {"width": self.heads.width, "continuous": self.heads.continuous.tolist(),
                      "softmax": [list(s) for s in self.heads.softmax]},
            "params": {k: v.tolist() for k, v in self.params.items()},
            "encoder": self.encoder.to_json() if self.encoder else None,
            "config": asdict(self.config) if self.config else None,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "TvaeModel":
        if obj.get("kind") != "tvae":
            raise TvaeError("not a TVAE model file")
        h = obj["heads"]
        heads = Heads(int(h["width"]), np.asarray(h["continuous"], dtype=np.int64),
                      [tuple(s) for s in h["softmax"]])
        cfg = obj.get("config")
        model = cls(
            {k: np.asarray(v, dtype=np.float64) for k, v in obj["params"].items()},
            heads, tuple(obj["hidden"]), int(obj["latent"]),
            EncoderState.from_json(obj["encoder"]) if obj.get("encoder") else None,
            TrainConfig(**cfg) if cfg else None,
        )
        model.check_shapes()
        return model

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "TvaeModel":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


# -- forward / backward --------------------------------------------------------
def _mlp_forward(p, names, x):
    acts = [x]
    for name in names:
        x = np.maximum(x @ p[name + ".W"] + p[name + ".b"], 0.0)
        acts.append(x)
    return x, acts


def _mlp_backward(p, names, acts, grad_out, grads):
    g = grad_out
    for i in range(len(names) - 1, -1, -1):
        name = names[i]
        g = g * (acts[i + 1] > 0)
        grads[name + ".W"] = acts[i].T @ g
        grads[name + ".b"] = g.sum(axis=0)
        g = g @ p[name + ".W"].T
    return g


def _variances(logvar: np.ndarray):
    raw = np.exp(logvar)
    return np.maximum(raw, VAR_FLOOR), raw >= VAR_FLOOR


def _decode_heads(p, hidden, z):
    names = _layer_names("dec", len(hidden))
    h, acts = _mlp_forward(p, names, z)
    return h @ p["out.W"] + p["out.b"], h, acts


def forward(model: TvaeModel, x: np.ndarray, eps: np.ndarray, beta: float = 1.0):
    """Loss terms and the cache needed by :func:`backward`."""
    p, heads = model.params, model.heads
    enc_names = _layer_names("enc", len(model.hidden))
    h, enc_acts = _mlp_forward(p, enc_names, x)
    mu = h @ p["mu.W"] + p["mu.b"]
    logvar = h @ p["logvar.W"] + p["logvar.b"]
    std = np.exp(0.5 * logvar)
    z = mu + std * eps
    out, dec_h, dec_acts = _decode_heads(p, model.hidden, z)

    n = len(x)
    c = heads.continuous
    var, live_var = _variances(p["out.logvar"])
    resid = x[:, c] - out[:, c]
    rec_rows = (0.5 * (_LOG_2PI + np.log(var)) + 0.5 * resid ** 2 / var).sum(axis=1)
    probs = []
    block_ce = []
    for start, width in heads.softmax:
        logits = out[:, start:start + width]
        lsm = log_softmax(logits, axis=1)
        ce = -(x[:, start:start + width] * lsm).sum(axis=1)
        block_ce.append(ce)
        rec_rows = rec_rows + ce
        probs.append(np.exp(lsm))
    kl_dims = -0.5 * (1.0 + logvar - mu ** 2 - np.exp(logvar))
    kl_rows = kl_dims.sum(axis=1)
    rec = float(rec_rows.mean())
    kl = float(kl_rows.mean())
    total = rec + beta * kl
    if not np.isfinite(total):
        bad = []
        if not np.all(np.isfinite(resid)):
            bad.append("continuous heads")
        bad += [f"softmax block at {s}" for (s, _), ce in zip(heads.softmax, block_ce) if not np.all(np.isfinite(ce))]
        raise TvaeError(f"non-finite loss (offending: {', '.join(bad) or 'latent/KL term'})")
    cache = dict(x=x, eps=eps, enc_acts=enc_acts, h=h, mu=mu, logvar=logvar, std=std, z=z,
                 out=out, dec_h=dec_h, dec_acts=dec_acts, var=var, live_var=live_var,
                 resid=resid, probs=probs, beta=beta, n=n)
    return {"total": total, "reconstruction": rec, "kl": kl, "kl_dims": kl_dims.mean(axis=0)}, cache


def backward(model: TvaeModel, cache) -> dict[str, np.ndarray]:
    p, heads = model.params, model.heads
    n, beta = cache["n"], cache["beta"]
    grads: dict[str, np.ndarray] = {}
    c = heads.continuous
    var, resid = cache["var"], cache["resid"]

    d_out = np.zeros_like(cache["out"])
    d_out[:, c] = -resid / var / n
    # d/d logvar of 0.5*log(var) + 0.5*r^2/var, zero where the floor is active
    g_lv = (0.5 - 0.5 * resid ** 2 / var).sum(axis=0) / n
    grads["out.logvar"] = np.where(cache["live_var"], g_lv, 0.0)
    x = cache["x"]
    for (start, width), pr in zip(heads.softmax, cache["probs"]):
        d_out[:, start:start + width] = (pr - x[:, start:start + width]) / n

    grads["out.W"] = cache["dec_h"].T @ d_out
    grads["out.b"] = d_out.sum(axis=0)
    d_h = d_out @ p["out.W"].T
    dz = _mlp_backward(p, _layer_names("dec", len(model.hidden)), cache["dec_acts"], d_h, grads)

    mu, logvar, std, eps = cache["mu"], cache["logvar"], cache["std"], cache["eps"]
    d_mu = dz + beta * mu / n
    d_lv = dz * eps * 0.5 * std + beta * 0.5 * (np.exp(logvar) - 1.0) / n
    h = cache["h"]
    grads["mu.W"] = h.T @ d_mu
    grads["mu.b"] = d_mu.sum(axis=0)
    grads["logvar.W"] = h.T @ d_lv
    grads["logvar.b"] = d_lv.sum(axis=0)
    d_enc = d_mu @ p["mu.W"].T + d_lv @ p["logvar.W"].T
    _mlp_backward(p, _layer_names("enc", len(model.hidden)), cache["enc_acts"], d_enc, grads)
    return grads


def tvae_loss(model: TvaeModel, batch: np.ndarray, eps: np.ndarray, beta: float = 1.0) -> dict:
    """Negative ELBO (batch mean) split into reconstruction and KL."""
    if len(batch) == 0:
        raise TvaeError("empty batch")
    if batch.shape[1] != model.heads.width:
        raise TvaeError(f"batch width {batch.shape[1]} does not match the model layout {model.heads.width}")
    terms, _ = forward(model, batch, eps, beta)
    return terms


def tvae_grad(model: TvaeModel, batch: np.ndarray, eps: np.ndarray, beta: float = 1.0) -> dict:
    """Exact gradients of :func:`tvae_loss` for fixed noise ``eps``."""
    terms, cache = forward(model, batch, eps, beta)
    return backward(model, cache)


def finite_difference_check(model: TvaeModel, batch, eps, step: float = 1e-5, beta: float = 1.0) -> float:
    """Worst relative error between analytic and central-difference gradients
    over every parameter entry."""
    grads = tvae_grad(model, batch, eps, beta)
    worst = 0.0
    for name, theta in model.params.items():
        g = grads[name]
        flat = theta.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = tvae_loss(model, batch, eps, beta)["total"]
            flat[i] = orig - step
            down = tvae_loss(model, batch, eps, beta)["total"]
            flat[i] = orig
            num = (up - down) / (2 * step)
            ana = g.reshape(-1)[i]
            err = abs(num - ana) / max(1e-8, abs(num) + abs(ana))
            # entries with near-zero gradient are judged on absolute error
            if abs(num) + abs(ana) < 1e-6:
                err = abs(num - ana)
            worst = max(worst, err)
    return worst


def toy_model(seed: int = 0, hidden=()) -> tuple[TvaeModel, np.ndarray, np.ndarray]:
    """4-wide input (two continuous scalars + a 2-way softmax block),
    latent 2, output 4; plus a batch and fixed noise."""
    rng = rng_stream(seed, 0)
    blocks = [Block("a", 0, 1, "continuous"), Block("b", 1, 1, "continuous"), Block("c", 2, 2, "softmax")]
    heads = Heads.from_blocks(blocks)
    params = init_params(4, 4, 2, hidden, 2, rng)
    params["out.logvar"] = rng.normal(0, 0.3, 2)
    model = TvaeModel(params, heads, tuple(hidden), 2)
    x = np.zeros((6, 4))
    x[:, :2] = rng.standard_normal((6, 2))
    x[np.arange(6), 2 + rng.integers(0, 2, 6)] = 1.0
    return model, x, rng.standard_normal((6, 2))


def gradient_self_check(tol: float = 1e-4) -> float:
    model, x, eps = toy_model(seed=12345, hidden=(3,))
    err = finite_difference_check(model, x, eps)
    if not err <= tol:
        raise TvaeError(f"gradient self-check failed: relative error {err:.3g} > {tol}")
    return err


# -- training ------------------------------------------------------------------------
class Adam:
    def __init__(self, params: dict[str, np.ndarray], cfg: TrainConfig):
        self.cfg = cfg
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params, grads) -> None:
        cfg = self.cfg
        self.t += 1
        c1 = 1 - cfg.beta1 ** self.t
        c2 = 1 - cfg.beta2 ** self.t
        for k, theta in params.items():
            g = grads[k] + cfg.weight_decay * theta
            m = self.m[k]
            v = self.v[k]
            m *= cfg.beta1
            m += (1 - cfg.beta1) * g
            v *= cfg.beta2
            v += (1 - cfg.beta2) * g * g
            theta -= cfg.lr * (m / c1) / (np.sqrt(v / c2) + cfg.eps)


def kl_weight(epoch: int, cfg: TrainConfig) -> float:
    if not cfg.kl_warmup:
        return 1.0
    ramp = max(1, math.ceil(0.1 * cfg.epochs))
    return min(1.0, (epoch + 1) / ramp)


def train_matrix(x: np.ndarray, blocks: list[Block], cfg: TrainConfig) -> TvaeModel:
    """Train on an already encoded matrix."""
    if not np.isfinite(x).all():
        raise TvaeError("training matrix holds non-finite values")
    heads = Heads.from_blocks(blocks)
    params = init_params(x.shape[1], heads.width, len(heads.continuous), cfg.hidden, cfg.latent,
                         rng_stream(cfg.seed, 1))
    model = TvaeModel(params, heads, cfg.hidden, cfg.latent, config=cfg)
    model.check_shapes()
    opt = Adam(params, cfg)
    shuffle_rng = rng_stream(cfg.seed, 2)
    noise_rng = rng_stream(cfg.seed, 3)
    n = len(x)
    bs = min(cfg.batch_size, n)
    for epoch in range(cfg.epochs):
        beta = kl_weight(epoch, cfg)
        order = shuffle_rng.permutation(n)
        sums = np.zeros(3)
        kl_dims = np.zeros(cfg.latent)
        for start in range(0, n, bs):
            idx = order[start:start + bs]
            batch = x[idx]
            eps = noise_rng.standard_normal((len(idx), cfg.latent))
            try:
                terms, cache = forward(model, batch, eps, beta)
            except TvaeError as exc:
                raise TvaeError(f"epoch {epoch + 1}: {exc}") from None
            if terms["kl"] < -1e-12:
                raise TvaeError(f"epoch {epoch + 1}: negative KL {terms['kl']}")
            grads = backward(model, cache)
            opt.step(params, grads)
            w = len(idx)
            sums += w * np.array([terms["total"], terms["reconstruction"], terms["kl"]])
            kl_dims += w * terms["kl_dims"]
        if not all(np.isfinite(v).all() for v in params.values()):
            raise TvaeError(f"epoch {epoch + 1}: parameters diverged to non-finite values")
        kl_dims /= n
        total, rec, kl = sums / n
        model.trace.append({"epoch": epoch + 1, "total": float(total), "reconstruction": float(rec),
                            "kl": float(kl), "active_dims": int((kl_dims > ACTIVE_KL).sum())})
        if (epoch + 1) % max(1, cfg.epochs // 10) == 0:
            log.info("tvae epoch %d: loss %.4f (rec %.4f, kl %.4f, active dims %d)",
                     epoch + 1, total, rec, kl, model.trace[-1]["active_dims"])
    return model


def tvae_fit(table: Table, cfg: TrainConfig | None = None) -> TvaeModel:
    """Encode ``table`` for the VAE and train with Adam."""
    cfg = cfg or TrainConfig()
    if cfg.self_check:
        gradient_self_check()
    split = split_missing(table, cfg.seed)
    state = fit_encoder(split, "tvae", mode_normalize=cfg.mode_normalize)
    enc = encode(split, state, cfg.seed)
    model = train_matrix(enc.values, enc.blocks, cfg)
    model.encoder = state
    if cfg.trace_path:
        write_trace(model.trace, cfg.trace_path)
    return model


def write_trace(trace: list[dict], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, ["epoch", "total", "reconstruction", "kl", "active_dims"], lineterminator="\n")
        w.writeheader()
        w.writerows(trace)


# -- sampling --------------------------------------------------------------------
def sample_matrix(model: TvaeModel, n: int, seed: int = 0, stochastic: bool = False,
                  noise: bool = False, chunk: int = 10_000) -> np.ndarray:
    """Decoder outputs for ``z ~ N(0, I)`` turned into encoded rows: the
    Gaussian mean for continuous columns (plus noise if asked) and a one-hot
    per softmax block, argmax by default or drawn when ``stochastic``."""
    if n < 1:
        raise TvaeError("sample size must be >= 1")
    rng = rng_stream(seed, 0)
    pick_rng = rng_stream(seed, 1)
    heads = model.heads
    var, _ = _variances(model.params["out.logvar"])
    rows = []
    for start in range(0, n, chunk):
        m = min(chunk, n - start)
        z = rng.standard_normal((m, model.latent))
        out, _, _ = _decode_heads(model.params, model.hidden, z)
        res = np.zeros_like(out)
        c = heads.continuous
        res[:, c] = out[:, c]
        if noise:
            res[:, c] += np.sqrt(var) * pick_rng.standard_normal((m, len(c)))
        for s, w in heads.softmax:
            if stochastic:
                pr = softmax(out[:, s:s + w], axis=1)
                u = pick_rng.random((m, 1))
                k = np.minimum((np.cumsum(pr, axis=1) < u).sum(axis=1), w - 1)
            else:
                k = np.argmax(out[:, s:s + w], axis=1)
            res[np.arange(m), s + k] = 1.0
        rows.append(res)
    return np.vstack(rows)


def tvae_sample(model: TvaeModel, n: int, seed: int = 0, stochastic: bool = False,
                noise: bool = False, stats: dict | None = None) -> Table:
    if model.encoder is None:
        raise TvaeError("model has no encoder state; train it with tvae_fit")
    return decode(sample_matrix(model, n, seed, stochastic, noise), model.encoder, stats)
