"""Conditional variational autoencoder over coefficient-matrix columns.

One model per retained mode: the encoder maps a normalized coefficient column
concatenated with the normalized parameters to a diagonal Gaussian latent
posterior; the decoder maps a latent draw concatenated with the parameters
back to the column.  Training minimizes reconstruction MSE plus the analytic
KL divergence to the unit Gaussian prior, with gradients flowing through the
reparameterization z = mu + eta * sigma.  Everything is plain numpy with
hand-derived backpropagation; gradient correctness is pinned against central
finite differences in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .frame import ExcitationSpec, FrameConfig
from .reduction import ReductionBasis, orthonormalize, rom_simulate

LOG_VAR_CLAMP = 10.0
LN_SHIFT = 2.0
DIVERGENCE_LIMIT = 1.0e6


class TrainingDivergedError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# column normalization
# ---------------------------------------------------------------------------


def normalize_column(x: np.ndarray) -> np.ndarray:
    """ln(x + 2); keeps component amplitudes comparable. Requires x > -2."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= -LN_SHIFT):
        bad = float(np.min(x))
        raise ValueError(f"coefficient entry {bad} <= -{LN_SHIFT}; ln-normalization undefined")
    return np.log(x + LN_SHIFT)


def denormalize_column(x_norm: np.ndarray) -> np.ndarray:
    """Exact inverse of :func:`normalize_column`."""
    return np.exp(np.asarray(x_norm, dtype=float)) - LN_SHIFT


# ---------------------------------------------------------------------------
# dense network with analytic backprop
# ---------------------------------------------------------------------------

_ACTIVATIONS = ("tanh", "sigmoid", "identity")


@dataclass
class DenseLayer:
    weights: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)
    activation: str = "tanh"

    def __post_init__(self):
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation '{self.activation}'")
        if self.weights.shape[0] != self.bias.shape[0]:
            raise ValueError("weights/bias shape mismatch")


def _act(pre: np.ndarray, kind: str) -> np.ndarray:
    if kind == "tanh":
        return np.tanh(pre)
    if kind == "sigmoid":
        return 1.0 / (1.0 + np.exp(-pre))
    return pre


def _act_grad(pre: np.ndarray, out: np.ndarray, kind: str) -> np.ndarray:
    if kind == "tanh":
        return 1.0 - out * out
    if kind == "sigmoid":
        return out * (1.0 - out)
    return np.ones_like(pre)


class Network:
    """A stack of dense layers with cached forward / chain-rule backward."""

    def __init__(self, layers: list[DenseLayer]):
        self.layers = layers

    @classmethod
    def build(cls, sizes: list[int], activations: list[str], rng: np.random.Generator):
        if len(activations) != len(sizes) - 1:
            raise ValueError("one activation per layer required")
        layers = []
        for i in range(len(sizes) - 1):
            fan_in, fan_out = sizes[i], sizes[i + 1]
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            W = rng.uniform(-bound, bound, size=(fan_out, fan_in))
            layers.append(DenseLayer(weights=W, bias=np.zeros(fan_out), activation=activations[i]))
        return cls(layers)

    @property
    def in_dim(self) -> int:
        return self.layers[0].weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.layers[-1].weights.shape[0]

    def forward(self, x: np.ndarray):
        """Returns (output, cache) for a (batch, in_dim) input."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.in_dim:
            raise ValueError(f"input dim {x.shape[1]} != expected {self.in_dim}")
        cache = []
        out = x
        for layer in self.layers:
            pre = out @ layer.weights.T + layer.bias
            post = _act(pre, layer.activation)
            cache.append((out, pre, post))
            out = post
        return out, cache

    def backward(self, cache, grad_out: np.ndarray):
        """Returns (param_grads, grad_input); param_grads is [(dW, db), ...]."""
        grads = [None] * len(self.layers)
        g = np.asarray(grad_out, dtype=float)
        for i in reversed(range(len(self.layers))):
            layer = self.layers[i]
            x_in, pre, post = cache[i]
            dpre = g * _act_grad(pre, post, layer.activation)
            grads[i] = (dpre.T @ x_in, dpre.sum(axis=0))
            g = dpre @ layer.weights
        return grads, g

    def parameters(self):
        return [(layer.weights, layer.bias) for layer in self.layers]


def zero_grads(net: Network):
    return [(np.zeros_like(l.weights), np.zeros_like(l.bias)) for l in net.layers]


def accumulate(into, grads):
    for (aW, ab), (gW, gb) in zip(into, grads):
        aW += gW
        ab += gb
    return into


# ---------------------------------------------------------------------------
# VAE pieces
# ---------------------------------------------------------------------------


def reparameterize(mu: np.ndarray, sigma: np.ndarray, eta: np.ndarray) -> np.ndarray:
    """z = mu + eta * sigma with a caller-supplied standard-normal draw."""
    return np.asarray(mu) + np.asarray(eta) * np.asarray(sigma)


def kl_term(mu: np.ndarray, log_var: np.ndarray) -> float:
    """KL(N(mu, sigma^2) || N(0, I)) for a diagonal Gaussian, summed over the
    latent dimensions and averaged over the batch."""
    mu = np.atleast_2d(np.asarray(mu, dtype=float))
    log_var = np.atleast_2d(np.asarray(log_var, dtype=float))
    kl = -0.5 * np.sum(1.0 + log_var - mu**2 - np.exp(log_var), axis=1)
    return float(np.mean(kl))


@dataclass
class CvaeModel:
    """Encoder/decoder pair owning one coefficient-matrix column."""

    encoder: Network
    decoder: Network
    latent_dim: int
    column_index: int
    data_dim: int
    cond_dim: int
    normalization: str = f"ln(x+{LN_SHIFT:g})"
    trained: bool = False
    loss_trace: list = field(default_factory=list)

    def encode(self, x_norm: np.ndarray, p_norm: np.ndarray):
        enc_in = np.concatenate([np.atleast_2d(x_norm), np.atleast_2d(p_norm)], axis=1)
        out, cache = self.encoder.forward(enc_in)
        J = self.latent_dim
        mu = out[:, :J]
        log_var = np.clip(out[:, J:], -LOG_VAR_CLAMP, LOG_VAR_CLAMP)
        return mu, log_var, cache, out

    def decode(self, z: np.ndarray, p_norm: np.ndarray):
        dec_in = np.concatenate([np.atleast_2d(z), np.atleast_2d(p_norm)], axis=1)
        out, cache = self.decoder.forward(dec_in)
        return out, cache


def elbo_loss(model: CvaeModel, x_norm: np.ndarray, p_norm: np.ndarray, eta_draws: np.ndarray):
    """Loss (reconstruction MSE + KL), with gradients for every parameter.

    eta_draws has shape (N_v, batch, J).  Returns (loss, enc_grads, dec_grads,
    parts) where parts = (recon, kl).
    """
    x = np.atleast_2d(np.asarray(x_norm, dtype=float))
    p = np.atleast_2d(np.asarray(p_norm, dtype=float))
    eta_draws = np.asarray(eta_draws, dtype=float)
    if eta_draws.ndim == 2:
        eta_draws = eta_draws[None]
    n_v, batch, J = eta_draws.shape
    if batch != x.shape[0] or J != model.latent_dim:
        raise ValueError("eta_draws shape inconsistent with batch/latent dims")
    D = x.shape[1]

    mu, log_var, enc_cache, enc_out = model.encode(x, p)
    raw_lv = enc_out[:, model.latent_dim :]
    clip_mask = (np.abs(raw_lv) < LOG_VAR_CLAMP).astype(float)
    sigma = np.exp(0.5 * log_var)

    recon = 0.0
    dec_grads = None
    g_mu = np.zeros_like(mu)
    g_lv = np.zeros_like(log_var)
    for l in range(n_v):
        eta = eta_draws[l]
        z = reparameterize(mu, sigma, eta)
        x_hat, dec_cache = model.decode(z, p)
        diff = x_hat - x
        recon += float(np.mean(diff**2))
        dgrad = 2.0 * diff / (D * batch * n_v)
        grads_l, g_in = model.decoder.backward(dec_cache, dgrad)
        dec_grads = grads_l if dec_grads is None else accumulate(dec_grads, grads_l)
        g_z = g_in[:, :J]
        g_mu += g_z
        g_lv += g_z * eta * sigma * 0.5
    recon /= n_v

    kl = kl_term(mu, log_var)
    g_mu += mu / batch
    g_lv += 0.5 * (np.exp(log_var) - 1.0) / batch

    g_enc_out = np.concatenate([g_mu, g_lv * clip_mask], axis=1)
    enc_grads, _ = model.encoder.backward(enc_cache, g_enc_out)

    loss = recon + kl
    return loss, enc_grads, dec_grads, (recon, kl)


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------


@dataclass
class TrainConfig:
    epochs: int = 1500
    batch_size: int = 16
    learning_rate: float = 2.0e-3
    seed: int = 0
    n_latent_samples: int = 1  # N_v
    hidden: tuple[int, ...] = (32, 32)
    latent_dim: int = 4

    def validate(self):
        if min(self.epochs, self.batch_size, self.latent_dim, self.n_latent_samples) < 1:
            raise ValueError("epochs, batch_size, latent_dim and n_latent_samples must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")


class _Adam:
    """Adaptive moment estimation over a [(W, b), ...] parameter list."""

    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1.0e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [(np.zeros_like(W), np.zeros_like(b)) for W, b in params]
        self.v = [(np.zeros_like(W), np.zeros_like(b)) for W, b in params]

    def step(self, grads):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        corr1 = 1.0 - b1**self.t
        corr2 = 1.0 - b2**self.t
        for (W, b), (gW, gb), (mW, mb), (vW, vb) in zip(self.params, grads, self.m, self.v):
            mW *= b1
            mW += (1 - b1) * gW
            mb *= b1
            mb += (1 - b1) * gb
            vW *= b2
            vW += (1 - b2) * gW**2
            vb *= b2
            vb += (1 - b2) * gb**2
            W -= self.lr * (mW / corr1) / (np.sqrt(vW / corr2) + self.eps)
            b -= self.lr * (mb / corr1) / (np.sqrt(vb / corr2) + self.eps)


def build_model(data_dim: int, cond_dim: int, config: TrainConfig, rng: np.random.Generator,
                column_index: int = 0) -> CvaeModel:
    J = config.latent_dim
    enc_sizes = [data_dim + cond_dim, *config.hidden, 2 * J]
    dec_sizes = [J + cond_dim, *config.hidden, data_dim]
    acts = ["tanh"] * len(config.hidden) + ["identity"]
    return CvaeModel(
        encoder=Network.build(enc_sizes, acts, rng),
        decoder=Network.build(dec_sizes, acts, rng),
        latent_dim=J,
        column_index=column_index,
        data_dim=data_dim,
        cond_dim=cond_dim,
    )


def train(pairs: list, config: TrainConfig, column_index: int = 0, rng=None) -> CvaeModel:
    """Train one column model on (p_norm, x_norm) pairs.

    Deterministic for a fixed config.seed (``rng`` overrides the seed for
    sub-stream derivation); returns the model with its per-epoch loss trace
    attached.  Aborts with TrainingDivergedError when the loss exceeds the
    divergence limit.
    """
    config.validate()
    if not pairs:
        raise ValueError("at least one training pair is required")
    P = np.stack([np.asarray(p, dtype=float) for p, _ in pairs])
    X = np.stack([np.asarray(x, dtype=float) for _, x in pairs])
    n, data_dim = X.shape
    cond_dim = P.shape[1]

    if rng is None:
        rng = np.random.default_rng(config.seed)
    model = build_model(data_dim, cond_dim, config, rng, column_index=column_index)
    params = model.encoder.parameters() + model.decoder.parameters()
    opt = _Adam(params, config.learning_rate)

    trace = []
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            eta = rng.standard_normal((config.n_latent_samples, len(idx), config.latent_dim))
            loss, enc_g, dec_g, _ = elbo_loss(model, X[idx], P[idx], eta)
            if not np.isfinite(loss) or loss > DIVERGENCE_LIMIT:
                raise TrainingDivergedError(
                    f"loss {loss} at epoch {epoch} (column {column_index}, batch at {start})"
                )
            opt.step(enc_g + dec_g)
            epoch_loss += loss * len(idx)
        trace.append(epoch_loss / n)
    model.trained = True
    model.loss_trace = trace
    return model


def train_column_models(coefficient_set: list, config: TrainConfig) -> list[CvaeModel]:
    """One cVAE per coefficient-matrix column, trained sequentially with
    sub-seeds derived from the master seed."""
    if not coefficient_set:
        raise ValueError("empty coefficient set")
    samples = [s for s, _ in coefficient_set]
    mats = [np.asarray(c.X if hasattr(c, "X") else c, dtype=float) for _, c in coefficient_set]
    r = mats[0].shape[1]
    seeds = np.random.SeedSequence(config.seed).spawn(r)
    models = []
    for c in range(r):
        pairs = [
            (np.asarray(s.normalized, dtype=float), normalize_column(m[:, c]))
            for s, m in zip(samples, mats)
        ]
        models.append(
            train(pairs, config, column_index=c, rng=np.random.default_rng(seeds[c]))
        )
    return models


# ---------------------------------------------------------------------------
# generation and uncertainty propagation
# ---------------------------------------------------------------------------


def generate_coefficients(models: list[CvaeModel], p_query, mode: str = "mean", rng=None) -> np.ndarray:
    """Assemble a coefficient matrix column-by-column from the decoders."""
    if not models:
        raise ValueError("no column models supplied")
    for m in models:
        if not m.trained:
            raise ValueError(f"column model {m.column_index} is untrained")
    p_norm = np.atleast_2d(
        np.asarray(p_query.normalized if hasattr(p_query, "normalized") else p_query, dtype=float)
    )
    models = sorted(models, key=lambda m: m.column_index)
    r_global = models[0].data_dim
    X = np.zeros((r_global, len(models)))
    for c, m in enumerate(models):
        if mode == "mean":
            z = np.zeros((1, m.latent_dim))
        elif mode == "sampled":
            if rng is None:
                raise ValueError("sampled mode requires an rng")
            z = rng.standard_normal((1, m.latent_dim))
        else:
            raise ValueError(f"unknown mode '{mode}'")
        x_hat, _ = m.decode(z, p_norm)
        X[:, c] = denormalize_column(x_hat[0])
    return X


def generate_basis(
    models: list[CvaeModel],
    v_global,
    p_query,
    mode: str = "mean",
    seed: int | None = None,
) -> ReductionBasis:
    """Decode a basis at the query parameter: V(p) = V_global X, thin-QR
    re-orthonormalized.  ``mode='mean'`` decodes at z=0 (deterministic);
    ``mode='sampled'`` draws z ~ N(0, I) with the given seed."""
    Vg = v_global.modes if isinstance(v_global, ReductionBasis) else np.asarray(v_global)
    rng = np.random.default_rng(seed) if mode == "sampled" else None
    X = generate_coefficients(models, p_query, mode=mode, rng=rng)
    V = orthonormalize(Vg @ X)
    return ReductionBasis(
        modes=V,
        singular_values=np.zeros(V.shape[1]),
        energy_fraction=float("nan"),
        provenance=f"vprom:{mode}" + (f":seed={seed}" if mode == "sampled" else ""),
    )


@dataclass
class RomContext:
    """Everything a ROM replay needs besides the basis."""

    config: FrameConfig
    sample: object
    spec: ExcitationSpec
    hyper_weights: object = None
    excitation: np.ndarray | None = None


@dataclass
class BasisDistribution:
    mean_basis: ReductionBasis
    draws: list
    draw_seeds: list
    failures: list


@dataclass
class ResponseEnvelope:
    times: np.ndarray
    lower: np.ndarray  # (N_t, n) min over draws
    upper: np.ndarray  # (N_t, n) max over draws
    mean_trajectory: np.ndarray  # (N_t, n) from the z=0 basis
    n_success: int
    n_failed: int

    def width(self) -> np.ndarray:
        return self.upper - self.lower

    def containment_fraction(self) -> float:
        inside = (self.mean_trajectory >= self.lower) & (self.mean_trajectory <= self.upper)
        return float(np.mean(inside))


def uncertainty_envelope(
    models: list[CvaeModel],
    v_global,
    p_query,
    rom_context: RomContext,
    n_draws: int = 40,
    seed: int = 0,
    min_success_fraction: float = 0.8,
):
    """Propagate latent-space uncertainty through the ROM.

    Decodes ``n_draws`` sampled bases, integrates each, and returns the
    per-timestep min/max displacement envelope together with the mean-basis
    trajectory.  Failed draws are excluded and reported; at least
    ``min_success_fraction`` of the draws must integrate successfully.
    """
    from .frame import IntegrationError

    ctx = rom_context
    mean_basis = generate_basis(models, v_global, p_query, mode="mean")
    mean_sol = rom_simulate(
        ctx.config, ctx.sample, ctx.spec, mean_basis,
        hyper_weights=ctx.hyper_weights, excitation=ctx.excitation,
    )

    seeds = [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(n_draws)]
    draws, failures, trajectories = [], [], []
    for ds in seeds:
        basis = generate_basis(models, v_global, p_query, mode="sampled", seed=ds)
        try:
            sol = rom_simulate(
                ctx.config, ctx.sample, ctx.spec, basis,
                hyper_weights=ctx.hyper_weights, excitation=ctx.excitation,
            )
        except IntegrationError as exc:
            failures.append((ds, str(exc)))
            continue
        draws.append(basis)
        trajectories.append(sol.u)
    n_success = len(trajectories)
    if n_success < max(1, int(np.ceil(min_success_fraction * n_draws))):
        raise IntegrationError(
            f"only {n_success}/{n_draws} envelope draws integrated successfully"
        )
    stack = np.stack(trajectories)
    env = ResponseEnvelope(
        times=mean_sol.times,
        lower=stack.min(axis=0),
        upper=stack.max(axis=0),
        mean_trajectory=mean_sol.u,
        n_success=n_success,
        n_failed=len(failures),
    )
    dist = BasisDistribution(
        mean_basis=mean_basis, draws=draws, draw_seeds=seeds, failures=failures
    )
    return dist, env
