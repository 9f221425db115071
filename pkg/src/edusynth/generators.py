"""Deep generators: latent-noise denoising autoencoder, variational autoencoder
and a Gaussian-copula GAN, all trained on an :class:`EncodedMatrix`."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy.special import ndtr, ndtri
from scipy.stats import rankdata

from .dataset import Categorical, DomainError, EncodedMatrix, Encoding, Table, fit_encoding
from .neuralcore import (
    AdamState,
    as_rng,
    DenseNet,
    backward,
    forward,
    minibatches,
    mse_loss,
    optimize,
)


class TrainingDivergenceError(RuntimeError):
    def __init__(self, model: str, epoch: int):
        super().__init__(f"{model} training diverged (non-finite loss) at epoch {epoch}")
        self.epoch = epoch


@dataclass(frozen=True)
class GenTrainConfig:
    epochs: int = 100
    batch_size: int = 32
    seed: int = 0
    learning_rate: float = 1e-3
    # recompute this column as the sum of `sum_of` after generation
    derived_total: Optional[str] = None
    sum_of: tuple[str, ...] = ()

    def __post_init__(self):
        if self.epochs < 1:
            raise DomainError("epochs must be >= 1")
        if self.batch_size < 1:
            raise DomainError("batch_size must be >= 1")


def dae_config(**kw) -> GenTrainConfig:
    return GenTrainConfig(**{"epochs": 100, "batch_size": 32, "learning_rate": 1e-3, **kw})


def vae_config(**kw) -> GenTrainConfig:
    return GenTrainConfig(**{"epochs": 300, "batch_size": 500, "learning_rate": 1e-3, **kw})


def copulagan_config(**kw) -> GenTrainConfig:
    return GenTrainConfig(**{"epochs": 300, "batch_size": 500, "learning_rate": 2e-4, **kw})


def _check_finite(loss: float, model: str, epoch: int) -> None:
    if not math.isfinite(loss):
        raise TrainingDivergenceError(model, epoch)


def _check_n(n: int) -> None:
    if n < 1:
        raise DomainError("number of rows to generate must be >= 1")


# --------------------------------------------------------------------------- [0,1] scaling


@dataclass(frozen=True)
class UnitScaler:
    """Per-column affine map of an encoded matrix onto [0, 1]. Constant columns
    sit at 0.5 and always decode back to their constant."""

    lo: np.ndarray
    span: np.ndarray
    const: np.ndarray

    @classmethod
    def fit(cls, x: np.ndarray) -> "UnitScaler":
        lo = x.min(axis=0)
        span = x.max(axis=0) - lo
        const = span == 0
        return cls(lo, np.where(const, 1.0, span), const)

    def transform(self, x: np.ndarray) -> np.ndarray:
        u = (x - self.lo) / self.span
        u[:, self.const] = 0.5
        return u

    def inverse(self, u: np.ndarray) -> np.ndarray:
        x = u * self.span + self.lo
        x[:, self.const] = self.lo[self.const]
        return x


def _postprocess(encoded: np.ndarray, encoding: Encoding, cfg: GenTrainConfig) -> Table:
    """Shared post-processing: clip to schema bounds, round integer columns,
    argmax one-hot groups, optional derived-total recomputation."""
    table = encoding.inverse(encoded, clamp=True, round_integers=True)
    if cfg.derived_total:
        kind = table.schema.kind(cfg.derived_total)
        total = np.clip(sum(table[c] for c in cfg.sum_of), kind.min, kind.max)
        data = dict(table.data)
        data[cfg.derived_total] = total
        table = Table(table.schema, data)
    return table


def output_groups(encoding: Encoding, continuous_sigmoid: bool) -> list[tuple[int, int]]:
    """Column blocks for a softmax_grouped output layer. Continuous columns become
    width-1 (sigmoid) blocks when ``continuous_sigmoid`` and stay linear otherwise."""
    groups = encoding.groups()
    if continuous_sigmoid:
        groups += [(i, i + 1) for i in encoding.continuous_indices()]
    return sorted(groups)


# --------------------------------------------------------------------------- DAE


@dataclass
class DAEModel:
    encoder: DenseNet
    decoder: DenseNet
    encoding: Encoding
    scaler: UnitScaler
    train_data: np.ndarray  # unit-scaled training matrix, reused for generation
    cfg: GenTrainConfig
    latent_dim: int = 32
    noise_sigma: float = 0.1
    loss_history: list[float] = field(default_factory=list)
    trained: bool = False

    def reconstruct(self, x_unit: np.ndarray, noise: Optional[np.ndarray] = None) -> np.ndarray:
        z = forward(self.encoder, x_unit)[0]
        if noise is not None:
            z = z + noise
        return forward(self.decoder, z)[0]


def dae_networks(width: int, seed: int, latent_dim: int = 32, hidden: int = 64, dropout: float = 0.2):
    rng = np.random.default_rng(seed)
    enc = DenseNet.build([width, hidden, latent_dim], ["relu", "relu"], rng, dropout=[dropout, 0.0])
    dec = DenseNet.build([latent_dim, hidden, width], ["relu", "sigmoid"], rng, dropout=[dropout, 0.0])
    return enc, dec


def dae_objective(enc: DenseNet, dec: DenseNet, xb: np.ndarray, seed):
    """Reconstruction MSE of one batch through encoder and decoder, with
    dropout masks drawn from ``seed``. Returns ``(loss, enc_grads, dec_grads)``."""
    rng = as_rng(seed)
    z, c_enc = forward(enc, xb, training=True, seed=rng)
    out, c_dec = forward(dec, z, training=True, seed=rng)
    loss, g = mse_loss(out, xb)
    gd = backward(dec, c_dec, g)
    ge = backward(enc, c_enc, gd.input)
    return loss, ge, gd


def dae_fit(matrix: EncodedMatrix, cfg: GenTrainConfig = None, noise_sigma: float = 0.1) -> DAEModel:
    """Train input->64 relu->dropout->32 relu->64 relu->dropout->sigmoid on the
    min-max rescaled matrix with MSE and Adam."""
    cfg = cfg or dae_config()
    if noise_sigma < 0:
        raise DomainError("noise_sigma must be >= 0")
    scaler = UnitScaler.fit(matrix.data)
    x = scaler.transform(matrix.data)
    enc, dec = dae_networks(x.shape[1], cfg.seed)
    opt_e = AdamState(lr=cfg.learning_rate)
    opt_d = AdamState(lr=cfg.learning_rate)
    rng = np.random.default_rng(cfg.seed + 1)
    model = DAEModel(enc, dec, matrix.encoding, scaler, x, cfg, noise_sigma=noise_sigma)
    for epoch in range(cfg.epochs):
        total, count = 0.0, 0
        for idx in minibatches(len(x), cfg.batch_size, rng):
            xb = x[idx]
            loss, ge, gd = dae_objective(enc, dec, xb, rng)
            _check_finite(loss, "autoencoder", epoch)
            optimize(dec, opt_d, gd)
            optimize(enc, opt_e, ge)
            total += loss * len(idx)
            count += len(idx)
        model.loss_history.append(total / count)
    model.trained = True
    return model


def dae_generate(model: DAEModel, n: int, seed: int) -> Table:
    """Encode training rows (a seeded permutation, cycled to ``n``), add
    N(0, sigma^2) latent noise, decode and post-process."""
    _check_n(n)
    if not model.trained:
        raise DomainError("autoencoder is not trained")
    rng = np.random.default_rng(seed)
    m = len(model.train_data)
    rows = np.concatenate([rng.permutation(m) for _ in range(-(-n // m))])[:n]
    noise = rng.normal(0.0, model.noise_sigma, size=(n, model.latent_dim)) if model.noise_sigma > 0 else None
    out = model.reconstruct(model.train_data[rows], noise)
    return _postprocess(model.scaler.inverse(out), model.encoding, model.cfg)


# --------------------------------------------------------------------------- VAE


def gaussian_kl(mu: np.ndarray, logvar: np.ndarray) -> np.ndarray:
    """Per-row KL(N(mu, exp(logvar)) || N(0, I)) = 0.5 * sum(mu^2 + s^2 - log s^2 - 1)."""
    return 0.5 * np.sum(mu * mu + (np.expm1(logvar) - logvar), axis=1)


def reconstruction_loss(
    prob: np.ndarray, target: np.ndarray, encoding: Encoding, sigma: float, eps: float = 1e-12
) -> tuple[np.ndarray, np.ndarray]:
    """Per-row negative log-likelihood (up to constants) and its gradient w.r.t.
    ``prob``: categorical cross-entropy per one-hot group, Bernoulli for 0/1
    columns, Gaussian with fixed ``sigma`` for continuous columns."""
    loss = np.zeros(len(prob))
    grad = np.zeros_like(prob)
    for c in encoding.columns:
        a, b = c.start, c.stop
        if isinstance(c.kind, Categorical):
            p = np.clip(prob[:, a:b], eps, 1.0)
            t = target[:, a:b]
            if b - a == 1:
                p = np.clip(p, eps, 1.0 - eps)
                loss -= (t * np.log(p) + (1 - t) * np.log(1 - p))[:, 0]
                grad[:, a:b] = (p - t) / (p * (1 - p))
            else:
                loss -= (t * np.log(p)).sum(axis=1)
                grad[:, a:b] = -t / p
        else:
            d = prob[:, a] - target[:, a]
            loss += d * d / (2.0 * sigma * sigma)
            grad[:, a] = d / (sigma * sigma)
    return loss, grad


def vae_objective(enc: DenseNet, dec: DenseNet, xb: np.ndarray, eps: np.ndarray,
                  encoding: Encoding, recon_sigma: float, beta: float):
    """Batch-mean ELBO loss for fixed reparameterisation noise ``eps``.

    Returns ``(loss, mean_kl, encoder_grads, decoder_grads)``.
    """
    nb, L = eps.shape
    h, c_enc = forward(enc, xb, training=True)
    mu, logvar = h[:, :L], h[:, L:]
    std = np.exp(0.5 * logvar)
    z = mu + std * eps
    out, c_dec = forward(dec, z, training=True)
    rec, g_out = reconstruction_loss(out, xb, encoding, recon_sigma)
    kl = gaussian_kl(mu, logvar)
    loss = float(np.mean(rec + beta * kl))
    gd = backward(dec, c_dec, g_out / nb)
    gz = gd.input
    g_mu = gz + beta * mu / nb
    g_logvar = gz * eps * 0.5 * std + beta * 0.5 * np.expm1(logvar) / nb
    ge = backward(enc, c_enc, np.hstack([g_mu, g_logvar]))
    return loss, float(kl.mean()), ge, gd


@dataclass
class VAEModel:
    encoder: DenseNet
    decoder: DenseNet
    encoding: Encoding
    scaler: UnitScaler
    cfg: GenTrainConfig
    latent_dim: int = 32
    beta: float = 1.0
    recon_sigma: float = 0.05
    loss_history: list[float] = field(default_factory=list)
    kl_history: list[float] = field(default_factory=list)
    trained: bool = False


def vae_networks(width: int, latent_dim: int, groups, seed: int, hidden: int = 128):
    rng = np.random.default_rng(seed)
    enc = DenseNet.build([width, hidden, hidden, 2 * latent_dim], ["relu", "relu", "linear"], rng)
    dec = DenseNet.build(
        [latent_dim, hidden, hidden, width], ["relu", "relu", "softmax_grouped"], rng, groups=groups
    )
    return enc, dec


def vae_fit(
    matrix: EncodedMatrix,
    cfg: GenTrainConfig = None,
    latent_dim: int = 32,
    beta: float = 1.0,
    recon_sigma: float = 0.05,
) -> VAEModel:
    """Minimise reconstruction NLL + beta * KL with reparameterised sampling
    z = mu + sigma * eps. Losses are summed over features and averaged over rows."""
    cfg = cfg or vae_config()
    scaler = UnitScaler.fit(matrix.data)
    x = scaler.transform(matrix.data)
    groups = output_groups(matrix.encoding, continuous_sigmoid=True)
    enc, dec = vae_networks(x.shape[1], latent_dim, groups, cfg.seed)
    opt_e = AdamState(lr=cfg.learning_rate)
    opt_d = AdamState(lr=cfg.learning_rate)
    rng = np.random.default_rng(cfg.seed + 1)
    model = VAEModel(enc, dec, matrix.encoding, scaler, cfg, latent_dim, beta, recon_sigma)
    for epoch in range(cfg.epochs):
        total, count = 0.0, 0
        for idx in minibatches(len(x), cfg.batch_size, rng):
            xb = x[idx]
            eps = rng.standard_normal((len(idx), latent_dim))
            loss, kl, ge, gd = vae_objective(enc, dec, xb, eps, matrix.encoding, recon_sigma, beta)
            _check_finite(loss, "VAE", epoch)
            model.kl_history.append(kl)
            optimize(dec, opt_d, gd)
            optimize(enc, opt_e, ge)
            total += loss * len(idx)
            count += len(idx)
        model.loss_history.append(total / count)
    model.trained = True
    return model


def vae_generate(model: VAEModel, n: int, seed: int) -> Table:
    """Decode z ~ N(0, I) and post-process like the autoencoder."""
    _check_n(n)
    if not model.trained:
        raise DomainError("VAE is not trained")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, model.latent_dim))
    out = forward(model.decoder, z)[0]
    return _postprocess(model.scaler.inverse(out), model.encoding, model.cfg)


# --------------------------------------------------------------------------- copula


@dataclass(frozen=True)
class CopulaMarginals:
    """Sorted training values of each continuous encoded column."""

    columns: tuple[int, ...]
    sorted_values: tuple[np.ndarray, ...]

    @classmethod
    def fit(cls, data: np.ndarray, columns) -> "CopulaMarginals":
        cols = tuple(int(c) for c in columns)
        return cls(cols, tuple(np.sort(data[:, c]) for c in cols))

    def cdf(self, j: int, x: np.ndarray) -> np.ndarray:
        """Hazen-position empirical CDF, piecewise linear between order statistics."""
        v = self.sorted_values[j]
        n = len(v)
        pos = (np.arange(1, n + 1) - 0.5) / n
        return np.interp(x, v, pos)


def copula_transform(matrix: np.ndarray, marginals: CopulaMarginals, training: bool = False) -> np.ndarray:
    """Map continuous columns to normal scores Phi^-1(F(x)); other columns pass
    through. For the training data itself ``training=True`` uses average ranks
    and the Hazen position (r - 0.5) / n directly."""
    out = np.array(matrix, dtype=np.float64, copy=True)
    for j, c in enumerate(marginals.columns):
        if training:
            u = (rankdata(out[:, c], method="average") - 0.5) / out.shape[0]
        else:
            u = marginals.cdf(j, out[:, c])
        out[:, c] = ndtri(u)
    return out


def copula_inverse(matrix: np.ndarray, marginals: CopulaMarginals) -> np.ndarray:
    """Empirical quantile of Phi(z) by linear interpolation between order
    statistics; values beyond the extreme positions clamp to the observed range."""
    out = np.array(matrix, dtype=np.float64, copy=True)
    for j, c in enumerate(marginals.columns):
        v = marginals.sorted_values[j]
        n = len(v)
        pos = (np.arange(1, n + 1) - 0.5) / n
        out[:, c] = np.interp(ndtr(out[:, c]), pos, v)
    return out


# --------------------------------------------------------------------------- CopulaGAN


@dataclass
class CopulaGANModel:
    generator: DenseNet
    discriminator: DenseNet
    marginals: CopulaMarginals
    encoding: Encoding
    cfg: GenTrainConfig
    noise_dim: int = 64
    d_loss_history: list[float] = field(default_factory=list)
    g_loss_history: list[float] = field(default_factory=list)
    trained: bool = False


def gan_networks(width: int, groups, seed: int, noise_dim: int = 64, hidden: int = 128, dropout: float = 0.2):
    rng = np.random.default_rng(seed)
    gen = DenseNet.build(
        [noise_dim, hidden, hidden, width], ["relu", "relu", "softmax_grouped"], rng, groups=groups
    )
    disc = DenseNet.build(
        [width, hidden, hidden, 1], ["relu", "relu", "sigmoid"], rng, dropout=[dropout, dropout, 0.0]
    )
    return gen, disc


def _log(p: np.ndarray) -> np.ndarray:
    return np.log(np.clip(p, 1e-12, 1.0))


def discriminator_objective(disc: DenseNet, real: np.ndarray, fake: np.ndarray, seed):
    """BCE of real-vs-generated rows; ``seed`` drives the dropout masks."""
    nb, nf = len(real), len(fake)
    p, cache = forward(disc, np.vstack([real, fake]), training=True, seed=seed)
    p = p[:, 0]
    loss = float(-np.mean(_log(p[:nb])) - np.mean(_log(1.0 - p[nb:])))
    pc = np.clip(p, 1e-12, 1 - 1e-12)
    g = np.concatenate([-1.0 / pc[:nb] / nb, 1.0 / (1.0 - pc[nb:]) / nf])[:, None]
    return loss, backward(disc, cache, g)


def generator_objective(gen: DenseNet, disc: DenseNet, noise: np.ndarray, seed):
    """Non-saturating generator loss -mean(log D(G(noise))) and G's gradients."""
    nb = len(noise)
    fake, c_g = forward(gen, noise, training=True, seed=seed)
    p, c_d = forward(disc, fake, training=True, seed=seed)
    loss = float(-np.mean(_log(p)))
    gd = backward(disc, c_d, -1.0 / np.clip(p, 1e-12, 1.0) / nb)
    return loss, backward(gen, c_g, gd.input)


def copulagan_fit(
    matrix: EncodedMatrix,
    cfg: GenTrainConfig = None,
    noise_dim: int = 64,
    update_generator: bool = True,
) -> CopulaGANModel:
    """Alternate one discriminator and one generator Adam step per batch on
    binary cross-entropy (non-saturating generator loss) in copula space.

    ``update_generator=False`` freezes the generator at its random init.
    """
    cfg = cfg or copulagan_config()
    cont = matrix.encoding.continuous_indices()
    marginals = CopulaMarginals.fit(matrix.data, cont)
    x = copula_transform(matrix.data, marginals, training=True)
    groups = output_groups(matrix.encoding, continuous_sigmoid=False)
    gen, disc = gan_networks(x.shape[1], groups, cfg.seed, noise_dim)
    opt_g = AdamState(lr=cfg.learning_rate)
    opt_d = AdamState(lr=cfg.learning_rate)
    rng = np.random.default_rng(cfg.seed + 1)
    model = CopulaGANModel(gen, disc, marginals, matrix.encoding, cfg, noise_dim)
    for epoch in range(cfg.epochs):
        d_tot = g_tot = 0.0
        n_batches = 0
        for idx in minibatches(len(x), cfg.batch_size, rng):
            nb = len(idx)
            fake = forward(gen, rng.standard_normal((nb, noise_dim)))[0]
            d_loss, gd = discriminator_objective(disc, x[idx], fake, rng)
            _check_finite(d_loss, "CopulaGAN", epoch)
            optimize(disc, opt_d, gd)
            d_tot += d_loss
            if update_generator:
                g_loss, gg = generator_objective(gen, disc, rng.standard_normal((nb, noise_dim)), rng)
                _check_finite(g_loss, "CopulaGAN", epoch)
                optimize(gen, opt_g, gg)
                g_tot += g_loss
            n_batches += 1
        model.d_loss_history.append(d_tot / n_batches)
        model.g_loss_history.append(g_tot / n_batches)
    model.trained = True
    return model


def discriminator_accuracy(model: CopulaGANModel, matrix: EncodedMatrix, seed: int) -> float:
    """Share of real rows scored > 0.5 and generated rows scored < 0.5."""
    rng = np.random.default_rng(seed)
    x = copula_transform(matrix.data, model.marginals, training=True)
    fake = forward(model.generator, rng.standard_normal((len(x), model.noise_dim)))[0]
    p_real = forward(model.discriminator, x)[0][:, 0]
    p_fake = forward(model.discriminator, fake)[0][:, 0]
    return float(0.5 * (np.mean(p_real > 0.5) + np.mean(p_fake < 0.5)))


def _sample_categories(out: np.ndarray, encoding: Encoding, rng: np.random.Generator) -> np.ndarray:
    out = out.copy()
    for a, b in encoding.groups():
        if b - a == 1:
            out[:, a] = (rng.random(len(out)) < out[:, a]).astype(np.float64)
        else:
            p = out[:, a:b]
            cum = np.cumsum(p, axis=1)
            u = rng.random((len(out), 1)) * cum[:, -1:]
            pick = np.minimum((cum < u).sum(axis=1), b - a - 1)
            onehot = np.zeros_like(p)
            onehot[np.arange(len(out)), pick] = 1.0
            out[:, a:b] = onehot
    return out


def copulagan_generate(model: CopulaGANModel, n: int, seed: int) -> Table:
    """Noise -> generator -> categories sampled from the softmax outputs,
    continuous columns mapped back through the copula -> post-process."""
    _check_n(n)
    if not model.trained:
        raise DomainError("CopulaGAN is not trained")
    rng = np.random.default_rng(seed)
    out = forward(model.generator, rng.standard_normal((n, model.noise_dim)))[0]
    out = _sample_categories(out, model.encoding, rng)
    return _postprocess(copula_inverse(out, model.marginals), model.encoding, model.cfg)


# --------------------------------------------------------------------------- dispatch

DEEP_METHODS = ("dae", "vae", "copulagan")


def fit_and_generate(method: str, table: Table, n: int, seed: int, cfg: GenTrainConfig = None) -> Table:
    """Fit ``method`` on ``table`` and draw ``n`` rows; the model and the draw use
    seeds derived from ``seed``."""
    matrix = fit_encoding(table)
    defaults = {"dae": dae_config, "vae": vae_config, "copulagan": copulagan_config}
    if method not in defaults:
        raise DomainError(f"unknown deep method {method!r}")
    cfg = cfg or defaults[method](seed=seed)
    if method == "dae":
        return dae_generate(dae_fit(matrix, cfg), n, seed + 1)
    if method == "vae":
        return vae_generate(vae_fit(matrix, cfg), n, seed + 1)
    return copulagan_generate(copulagan_fit(matrix, cfg), n, seed + 1)


SNAPSHOT_FORMAT = "edusynth.model"


def save_model(model, path) -> None:
    """JSON snapshot (format version 1) of a trained DAE/VAE/CopulaGAN."""
    kind = type(model).__name__
    doc = {"format": SNAPSHOT_FORMAT, "version": 1, "kind": kind,
           "schema": model.encoding.schema.to_dict(), "cfg": asdict(model.cfg)}
    if isinstance(model, (DAEModel, VAEModel)):
        doc["encoder"] = model.encoder.to_dict()
        doc["decoder"] = model.decoder.to_dict()
        doc["scaler"] = {"lo": model.scaler.lo.tolist(), "span": model.scaler.span.tolist(),
                         "const": model.scaler.const.tolist()}
    if isinstance(model, DAEModel):
        doc["train_data"] = model.train_data.tolist()
        doc["noise_sigma"] = model.noise_sigma
    elif isinstance(model, VAEModel):
        doc.update(latent_dim=model.latent_dim, beta=model.beta, recon_sigma=model.recon_sigma)
    elif isinstance(model, CopulaGANModel):
        doc["generator"] = model.generator.to_dict()
        doc["discriminator"] = model.discriminator.to_dict()
        doc["marginals"] = {"columns": list(model.marginals.columns),
                            "values": [v.tolist() for v in model.marginals.sorted_values]}
        doc["noise_dim"] = model.noise_dim
    else:
        raise DomainError(f"cannot snapshot {kind}")
    doc["encoding"] = [
        {"name": c.name, "start": c.start, "width": c.width, "mean": c.mean, "std": c.std}
        for c in model.encoding.columns
    ]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_model(path):
    from .dataset import ColumnEncoding, Schema

    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != SNAPSHOT_FORMAT or doc.get("version") != 1:
        raise DomainError("unsupported model snapshot")
    schema = Schema.from_dict(doc["schema"])
    encoding = Encoding(
        schema,
        tuple(
            ColumnEncoding(c["name"], schema.kind(c["name"]), c["start"], c["width"], c["mean"], c["std"])
            for c in doc["encoding"]
        ),
    )
    c = doc["cfg"]
    cfg = GenTrainConfig(**{**c, "sum_of": tuple(c["sum_of"])})
    if doc["kind"] in ("DAEModel", "VAEModel"):
        sc = doc["scaler"]
        scaler = UnitScaler(np.array(sc["lo"]), np.array(sc["span"]), np.array(sc["const"], dtype=bool))
        enc, dec = DenseNet.from_dict(doc["encoder"]), DenseNet.from_dict(doc["decoder"])
        if doc["kind"] == "DAEModel":
            return DAEModel(enc, dec, encoding, scaler, np.array(doc["train_data"]), cfg,
                            latent_dim=dec.input_dim, noise_sigma=doc["noise_sigma"], trained=True)
        return VAEModel(enc, dec, encoding, scaler, cfg, doc["latent_dim"], doc["beta"],
                        doc["recon_sigma"], trained=True)
    marg = CopulaMarginals(tuple(doc["marginals"]["columns"]),
                           tuple(np.array(v) for v in doc["marginals"]["values"]))
    return CopulaGANModel(DenseNet.from_dict(doc["generator"]), DenseNet.from_dict(doc["discriminator"]),
                          marg, encoding, cfg, doc["noise_dim"], trained=True)
