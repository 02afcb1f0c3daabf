"""Five grid-adapted forecasting architectures behind one ForecastModel contract.

All models consume a Batch of lookback windows and emit (B, W) normalized
predictions.  Weather fusion parameters are attached separately (see fusion);
each architecture exposes a structural bypass so that withholding weather at
inference reproduces the load-only forward bit for bit.
"""

import hashlib
from dataclasses import dataclass

import numpy as np

from .autodiff import (Parameter, SelectiveScanParams, Tensor, activation,
                       concat, embedding_lookup, layer_norm, linear, lstm_layer,
                       moving_avg_decompose, multi_head_attention,
                       selective_scan, softmax_lastdim, stack)
from .errors import BadConfig, BadDim, CovariateMismatch, ShapeMismatch
from .series import Batch

ARCHS = ("s_mamba", "powermamba", "patchtst", "itransformer", "lstm")
FUSION_MODES = ("none", "temporal", "weather")

STATE_DIM = 16      # selective-scan states per channel
DECOMP_KERNEL = 25  # trend window for series decomposition, hours

_D_MODEL_DEFAULT = {"itransformer": 512}
_N_LAYERS_DEFAULT = {"lstm": 2}


def _stable_hash(name: str) -> int:
    """Process-independent 63-bit hash (the builtin hash() is salted)."""
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") >> 1


@dataclass
class ModelConfig:
    arch: str
    d_model: int | None = None
    n_layers: int | None = None
    L: int = 240
    W: int = 24
    patch_len: int = 16
    patch_stride: int = 8
    heads: int = 4
    bidirectional: bool = True
    fusion_mode: str = "temporal"
    covariate_count: int = 0
    seed: int = 0
    dropout: float = 0.1

    def __post_init__(self):
        if self.arch not in ARCHS:
            raise BadConfig(f"unknown arch {self.arch!r}")
        if self.fusion_mode not in FUSION_MODES:
            raise BadConfig(f"unknown fusion_mode {self.fusion_mode!r}")
        if self.d_model is None:
            self.d_model = _D_MODEL_DEFAULT.get(self.arch, 256)
        if self.n_layers is None:
            self.n_layers = _N_LAYERS_DEFAULT.get(self.arch, 3)
        if self.d_model % 4:
            raise BadConfig("d_model must be divisible by 4")
        if self.d_model % self.heads:
            raise BadConfig("d_model must be divisible by heads")
        if self.L < 1 or self.W < 1 or self.n_layers < 1:
            raise BadConfig("L, W, n_layers must be positive")
        if self.arch == "patchtst":
            if self.patch_len < 1 or self.patch_stride < 1:
                raise BadConfig("patch_len and patch_stride must be positive")
            if self.patch_len > self.L:
                raise BadConfig("patch_len must not exceed L")
        if self.fusion_mode == "weather" and self.covariate_count < 1:
            raise BadConfig("weather mode requires covariate_count >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise BadConfig("dropout must lie in [0, 1)")
        if self.seed < 0:
            raise BadConfig("seed must be non-negative")


class ParamStore:
    """Named parameters with per-name seeded initialization.

    Every parameter draws from a stream keyed by (seed, name), so creating or
    omitting one group (temporal tables, fusion layers) never changes the
    values any other parameter receives.
    """

    def __init__(self, seed: int):
        self.seed = seed
        self.params: dict[str, Parameter] = {}

    def _rng(self, name: str) -> np.random.Generator:
        ss = np.random.SeedSequence([self.seed, _stable_hash(name)])
        return np.random.Generator(np.random.Philox(ss))

    def _add(self, name: str, p: Parameter) -> Parameter:
        if name in self.params:
            raise BadConfig(f"duplicate parameter name {name!r}")
        self.params[name] = p
        return p

    def uniform(self, name: str, shape: tuple, fan_in: int,
                scale: float = 1.0) -> Parameter:
        bound = scale / np.sqrt(fan_in)
        data = self._rng(name).uniform(-bound, bound, size=shape)
        return self._add(name, Parameter(data, name))

    def zeros(self, name: str, shape: tuple) -> Parameter:
        return self._add(name, Parameter(np.zeros(shape), name))

    def constant(self, name: str, values: np.ndarray) -> Parameter:
        return self._add(name, Parameter(np.array(values, dtype=np.float64), name))


def dropout(x: Tensor, rate: float, train: bool, rng) -> Tensor:
    """Inverted dropout; identity when not training or rate is zero."""
    if not train or rate <= 0.0:
        return x
    if rng is None:
        raise BadConfig("training forward requires an rng for dropout")
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return x * Tensor(keep)


class TemporalEmbed:
    """Learnable hour-of-day and day-of-week embeddings, projected to d.

    Hour table 24 x d/4 and day table 7 x d/4 are looked up per step,
    concatenated to d/2 and linearly projected to d.
    """

    def __init__(self, store: ParamStore, d: int, prefix: str = "temporal"):
        if d % 4:
            raise BadDim("temporal embedding needs d divisible by 4")
        q = d // 4
        self.hour = store.uniform(f"{prefix}.hour_table", (24, q), q)
        self.dow = store.uniform(f"{prefix}.dow_table", (7, q), q)
        self.w = store.uniform(f"{prefix}.proj.w", (d, 2 * q), 2 * q)
        self.b = store.zeros(f"{prefix}.proj.b", (d,))

    def __call__(self, hour_idx: np.ndarray, dow_idx: np.ndarray) -> Tensor:
        h = embedding_lookup(self.hour, hour_idx)
        w = embedding_lookup(self.dow, dow_idx)
        return linear(concat([h, w], axis=-1), self.w, self.b)


class AttnPool:
    """Attention-weighted pooling over time: a = softmax(w . h_t), c = sum a_t h_t."""

    def __init__(self, store: ParamStore, d: int, prefix: str):
        self.w = store.uniform(f"{prefix}.w", (d,), d)
        self.last_weights: np.ndarray | None = None

    def __call__(self, h: Tensor) -> Tensor:
        scores = (h * self.w).sum(axis=2)            # (B, L)
        attn = softmax_lastdim(scores)
        self.last_weights = attn.data.copy()
        B, L, d = h.shape
        return (attn.reshape(B, L, 1) * h).sum(axis=1)


class _MambaBlock:
    """Gated selective-scan block: x + W_o(scan(W_i ln(x)) * silu(W_g ln(x)))."""

    def __init__(self, store: ParamStore, d: int, prefix: str):
        self.ln_g = store.constant(f"{prefix}.ln.gain", np.ones(d))
        self.ln_b = store.zeros(f"{prefix}.ln.shift", (d,))
        self.w_in = store.uniform(f"{prefix}.w_in", (d, d), d)
        self.b_in = store.zeros(f"{prefix}.b_in", (d,))
        self.w_gate = store.uniform(f"{prefix}.w_gate", (d, d), d)
        self.b_gate = store.zeros(f"{prefix}.b_gate", (d,))
        # S4D-real transition init; skip term starts at identity passthrough
        log_a = np.tile(np.log(np.arange(1.0, STATE_DIM + 1.0)), (d, 1))
        self.ssm = SelectiveScanParams(
            log_A=store.constant(f"{prefix}.ssm.log_A", log_a),
            w_delta=store.uniform(f"{prefix}.ssm.w_delta", (d, d), d),
            b_delta=store.zeros(f"{prefix}.ssm.b_delta", (d,)),
            w_b=store.uniform(f"{prefix}.ssm.w_b", (STATE_DIM, d), d),
            w_c=store.uniform(f"{prefix}.ssm.w_c", (STATE_DIM, d), d),
            skip_d=store.constant(f"{prefix}.ssm.skip_d", np.ones(d)))
        self.w_out = store.uniform(f"{prefix}.w_out", (d, d), d)
        self.b_out = store.zeros(f"{prefix}.b_out", (d,))

    def __call__(self, x: Tensor, rate: float, train: bool, rng) -> Tensor:
        h = layer_norm(x, self.ln_g, self.ln_b)
        a = selective_scan(linear(h, self.w_in, self.b_in), self.ssm)
        g = activation(linear(h, self.w_gate, self.b_gate), "silu")
        y = linear(a * g, self.w_out, self.b_out)
        return x + dropout(y, rate, train, rng)


class _MambaStack:
    def __init__(self, store: ParamStore, d: int, n_layers: int, prefix: str):
        self.blocks = [_MambaBlock(store, d, f"{prefix}.b{i}")
                       for i in range(n_layers)]

    def __call__(self, x: Tensor, rate: float, train: bool, rng) -> Tensor:
        for blk in self.blocks:
            x = blk(x, rate, train, rng)
        return x


class _BidirMamba:
    """Forward and time-reversed stacks, concatenated then projected back to d."""

    def __init__(self, store: ParamStore, d: int, n_layers: int, prefix: str,
                 bidirectional: bool):
        self.bidirectional = bidirectional
        self.fwd = _MambaStack(store, d, n_layers, f"{prefix}.fwd")
        if bidirectional:
            self.bwd = _MambaStack(store, d, n_layers, f"{prefix}.bwd")
            self.fuse_w = store.uniform(f"{prefix}.fuse.w", (d, 2 * d), 2 * d)
            self.fuse_b = store.zeros(f"{prefix}.fuse.b", (d,))

    def __call__(self, x: Tensor, rate: float, train: bool, rng) -> Tensor:
        f = self.fwd(x, rate, train, rng)
        if not self.bidirectional:
            return f
        b = self.bwd(x.flip(1), rate, train, rng).flip(1)
        return linear(concat([f, b], axis=2), self.fuse_w, self.fuse_b)


class _TransformerBlock:
    """Pre-norm self-attention block with a GELU feed-forward."""

    def __init__(self, store: ParamStore, d: int, heads: int, prefix: str):
        self.heads = heads
        d_ff = int(2.5 * d)
        self.ln1_g = store.constant(f"{prefix}.ln1.gain", np.ones(d))
        self.ln1_b = store.zeros(f"{prefix}.ln1.shift", (d,))
        self.wq = store.uniform(f"{prefix}.attn.wq", (d, d), d)
        self.wk = store.uniform(f"{prefix}.attn.wk", (d, d), d)
        self.wv = store.uniform(f"{prefix}.attn.wv", (d, d), d)
        self.wo = store.uniform(f"{prefix}.attn.wo", (d, d), d)
        self.bq = store.zeros(f"{prefix}.attn.bq", (d,))
        self.bv = store.zeros(f"{prefix}.attn.bv", (d,))
        self.bo = store.zeros(f"{prefix}.attn.bo", (d,))
        self.ln2_g = store.constant(f"{prefix}.ln2.gain", np.ones(d))
        self.ln2_b = store.zeros(f"{prefix}.ln2.shift", (d,))
        self.ff_w1 = store.uniform(f"{prefix}.ff.w1", (d_ff, d), d)
        self.ff_b1 = store.zeros(f"{prefix}.ff.b1", (d_ff,))
        self.ff_w2 = store.uniform(f"{prefix}.ff.w2", (d, d_ff), d_ff)
        self.ff_b2 = store.zeros(f"{prefix}.ff.b2", (d,))
        self.last_attn: np.ndarray | None = None

    def __call__(self, x: Tensor, rate: float, train: bool, rng) -> Tensor:
        h = layer_norm(x, self.ln1_g, self.ln1_b)
        a, self.last_attn = multi_head_attention(
            h, h, h, self.wq, self.wk, self.wv, self.wo, self.heads,
            bq=self.bq, bv=self.bv, bo=self.bo, return_attn=True)
        x = x + dropout(a, rate, train, rng)
        h = layer_norm(x, self.ln2_g, self.ln2_b)
        f = linear(activation(linear(h, self.ff_w1, self.ff_b1), "gelu"),
                   self.ff_w2, self.ff_b2)
        return x + dropout(f, rate, train, rng)


def patch_count(L: int, patch_len: int, stride: int) -> int:
    """Number of patches: full strides plus one replicate-padded tail if needed."""
    n = (L - patch_len) // stride + 1
    if (L - patch_len) % stride:
        n += 1
    return n


def _patch_indices(L: int, patch_len: int, stride: int) -> np.ndarray:
    """(n_patches, patch_len) time indices; tail indices clip to L-1 (replicate pad)."""
    n = patch_count(L, patch_len, stride)
    starts = np.arange(n) * stride
    idx = starts[:, None] + np.arange(patch_len)[None, :]
    return np.minimum(idx, L - 1)


class ForecastModel:
    """Common contract: forward(Batch) -> (B, W) normalized predictions."""

    def __init__(self, config: ModelConfig):
        self.config = config
        self.store = ParamStore(config.seed)
        self.fusion_spec = None   # set by attach_fusion
        self.pool_weights: np.ndarray | None = None

    @property
    def params(self) -> dict[str, Parameter]:
        return self.store.params

    def parameters(self) -> list[Parameter]:
        return list(self.store.params.values())

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def _weather_active(self, batch: Batch) -> bool:
        spec = self.fusion_spec
        if spec is None or spec.mode != "weather" or batch.weather is None:
            return False
        if batch.weather.shape[2] != len(spec.covariate_names):
            raise CovariateMismatch(
                f"batch carries {batch.weather.shape[2]} covariates, "
                f"fusion spec names {len(spec.covariate_names)}")
        return True

    def forward(self, batch: Batch, train: bool = False, rng=None) -> Tensor:
        if batch.x.ndim != 2 or batch.x.shape[1] != self.config.L:
            raise ShapeMismatch(
                f"batch x {batch.x.shape} incompatible with L={self.config.L}")
        return self._forward(batch, train, rng)

    def _forward(self, batch: Batch, train: bool, rng) -> Tensor:
        raise NotImplementedError


class SMamba(ForecastModel):
    """Bidirectional selective-scan encoder with attention pooling.

    Weather, when attached and present, enters by embedding-space summation
    before the encoder (early fusion).
    """

    def __init__(self, config: ModelConfig):
        super().__init__(config)
        s, d = self.store, config.d_model
        self.w_in = s.uniform("in_proj.w", (d, 1), 1)
        self.b_in = s.zeros("in_proj.b", (d,))
        self.temporal = (TemporalEmbed(s, d) if config.fusion_mode != "none"
                         else None)
        self.encoder = _BidirMamba(s, d, config.n_layers, "enc",
                                   config.bidirectional)
        self.pool = AttnPool(s, d, "pool")
        self.w_head = s.uniform("head.w", (config.W, d), d)
        self.b_head = s.zeros("head.b", (config.W,))

    def _embed(self, batch: Batch, train: bool, rng) -> Tensor:
        h = linear(Tensor(batch.x[..., None]), self.w_in, self.b_in)
        if self.temporal is not None:
            h = h + self.temporal(batch.hour_idx, batch.dow_idx)
        if self._weather_active(batch):
            h = h + _fusion_mlp_forward(self, Tensor(batch.weather))
        return dropout(h, self.config.dropout, train, rng)

    def _forward(self, batch: Batch, train: bool, rng) -> Tensor:
        h = self._embed(batch, train, rng)
        enc = self.encoder(h, self.config.dropout, train, rng)
        c = self.pool(enc)
        self.pool_weights = self.pool.last_weights
        return linear(c, self.w_head, self.b_head)


class PowerMamba(ForecastModel):
    """Decomposition SSM: trend and seasonal branches encoded independently.

    Weather, when attached and present, is summed into the embedding before
    the moving-average decomposition, so both branches see its effect.
    """

    def __init__(self, config: ModelConfig):
        super().__init__(config)
        s, d = self.store, config.d_model
        self.w_in = s.uniform("in_proj.w", (d, 1), 1)
        self.b_in = s.zeros("in_proj.b", (d,))
        self.temporal = (TemporalEmbed(s, d) if config.fusion_mode != "none"
                         else None)
        self.enc_trend = _BidirMamba(s, d, config.n_layers, "enc_trend",
                                     config.bidirectional)
        self.enc_seas = _BidirMamba(s, d, config.n_layers, "enc_seas",
                                    config.bidirectional)
        self.pool_trend = AttnPool(s, d, "pool_trend")
        self.pool_seas = AttnPool(s, d, "pool_seas")
        self.w_head = s.uniform("head.w", (config.W, 2 * d), 2 * d)
        self.b_head = s.zeros("head.b", (config.W,))

    def _forward(self, batch: Batch, train: bool, rng) -> Tensor:
        h = linear(Tensor(batch.x[..., None]), self.w_in, self.b_in)
        if self.temporal is not None:
            h = h + self.temporal(batch.hour_idx, batch.dow_idx)
        if self._weather_active(batch):
            h = h + _fusion_mlp_forward(self, Tensor(batch.weather))
        h = dropout(h, self.config.dropout, train, rng)
        trend, seasonal = moving_avg_decompose(h, DECOMP_KERNEL)
        ct = self.pool_trend(self.enc_trend(trend, self.config.dropout, train, rng))
        cs = self.pool_seas(self.enc_seas(seasonal, self.config.dropout, train, rng))
        self.pool_weights = self.pool_trend.last_weights
        return linear(concat([ct, cs], axis=1), self.w_head, self.b_head)


class PatchTST(ForecastModel):
    """Patch transformer over the load channel; temporal context is implicit
    in the patch structure, so no calendar embedding is used.

    Weather, when attached and present, is patched with a shared embedding and
    consumed through one cross-attention sublayer after each encoder block
    (load patches query weather patches).
    """

    def __init__(self, config: ModelConfig):
        super().__init__(config)
        s, d = self.store, config.d_model
        self.n_patches = patch_count(config.L, config.patch_len,
                                     config.patch_stride)
        self.patch_idx = _patch_indices(config.L, config.patch_len,
                                        config.patch_stride)
        self.w_embed = s.uniform("patch_embed.w", (d, config.patch_len),
                                 config.patch_len)
        self.b_embed = s.zeros("patch_embed.b", (d,))
        self.pos = s.uniform("pos", (self.n_patches, d), d)
        self.blocks = [_TransformerBlock(s, d, config.heads, f"b{i}")
                       for i in range(config.n_layers)]
        flat = self.n_patches * d
        self.w_head = s.uniform("head.w", (config.W, flat), flat)
        self.b_head = s.zeros("head.b", (config.W,))

    def _forward(self, batch: Batch, train: bool, rng) -> Tensor:
        B = batch.x.shape[0]
        rate = self.config.dropout
        patches = Tensor(batch.x)[:, self.patch_idx]        # (B, n, P)
        h = linear(patches, self.w_embed, self.b_embed) + self.pos
        h = dropout(h, rate, train, rng)
        weather_kv = None
        if self._weather_active(batch):
            weather_kv = _weather_patches_forward(self, batch)
        for i, blk in enumerate(self.blocks):
            h = blk(h, rate, train, rng)
            if weather_kv is not None:
                h = h + dropout(_cross_attn_forward(self, i, h, weather_kv),
                                rate, train, rng)
        flat = h.reshape(B, self.n_patches * self.config.d_model)
        return linear(flat, self.w_head, self.b_head)


class ITransformer(ForecastModel):
    """Variate-token transformer: the whole lookback of each variate is one
    token, and self-attention models cross-variate structure.

    Tokens: load always; hour and day-of-week indices (scaled to [0, 1]) in
    temporal and weather modes; one gated token per weather covariate when
    fusion is attached and weather is present.  A token whose gate is exactly
    zero is dropped from the attention support entirely, which is what makes
    zeroed gates and withheld weather coincide bit for bit.

    With covariate tokens present the model runs the encoder twice, with and
    without them, and blends the two forecasts through the learned scalar
    fusion.mix.  Covariate influence therefore enters through one knob that
    starts near zero instead of rescaling tokens that layer norm would
    immediately re-inflate.
    """

    def __init__(self, config: ModelConfig):
        super().__init__(config)
        s, d, L = self.store, config.d_model, config.L
        self.w_load = s.uniform("embed_load.w", (d, L), L)
        self.b_load = s.zeros("embed_load.b", (d,))
        if config.fusion_mode != "none":
            self.w_hour = s.uniform("temporal.embed_hour.w", (d, L), L)
            self.b_hour = s.zeros("temporal.embed_hour.b", (d,))
            self.w_dow = s.uniform("temporal.embed_dow.w", (d, L), L)
            self.b_dow = s.zeros("temporal.embed_dow.b", (d,))
        self.blocks = [_TransformerBlock(s, d, config.heads, f"b{i}")
                       for i in range(config.n_layers)]
        self.w_head = s.uniform("head.w", (config.W, d), d)
        self.b_head = s.zeros("head.b", (config.W,))
        self.attn_maps: list[np.ndarray] = []

    def _forward(self, batch: Batch, train: bool, rng) -> Tensor:
        rate = self.config.dropout
        tokens = [linear(Tensor(batch.x), self.w_load, self.b_load)]
        if self.config.fusion_mode != "none":
            tokens.append(linear(Tensor(batch.hour_idx / 23.0),
                                 self.w_hour, self.b_hour))
            tokens.append(linear(Tensor(batch.dow_idx / 6.0),
                                 self.w_dow, self.b_dow))
        cov = (_weather_tokens_forward(self, batch)
               if self._weather_active(batch) else [])
        if not cov:
            return self._encode(tokens, rate, train, rng)
        base = self._encode(tokens, rate, train, rng, record=False)
        full = self._encode(tokens + cov, rate, train, rng)
        return base + (full - base) * self.params["fusion.mix"]

    def _encode(self, tokens: list, rate: float, train: bool, rng,
                record: bool = True) -> Tensor:
        h = dropout(stack(tokens, axis=1), rate, train, rng)
        maps = []
        for blk in self.blocks:
            h = blk(h, rate, train, rng)
            maps.append(blk.last_attn)
        if record:
            self.attn_maps = maps
        return linear(h[:, 0], self.w_head, self.b_head)


class Lstm(ForecastModel):
    """Stacked bidirectional LSTM with attention pooling.

    Weather, when attached and present, is embedded per step and injected
    into the first recurrent layer's gate preactivations -- the block-matrix
    form of concatenating weather features to the step input.
    """

    def __init__(self, config: ModelConfig):
        super().__init__(config)
        s, d = self.store, config.d_model
        self.w_in = s.uniform("in_proj.w", (d, 1), 1)
        self.b_in = s.zeros("in_proj.b", (d,))
        self.temporal = (TemporalEmbed(s, d) if config.fusion_mode != "none"
                         else None)
        self.layers = {}
        dirs = ("fwd", "bwd") if config.bidirectional else ("fwd",)
        for direction in dirs:
            for i in range(config.n_layers):
                pre = f"enc.{direction}.l{i}"
                self.layers[direction, i] = (
                    s.uniform(f"{pre}.w", (4 * d, d), d),
                    s.uniform(f"{pre}.u", (4 * d, d), d),
                    s.zeros(f"{pre}.b", (4 * d,)))
        if config.bidirectional:
            self.fuse_w = s.uniform("enc.fuse.w", (d, 2 * d), 2 * d)
            self.fuse_b = s.zeros("enc.fuse.b", (d,))
        self.pool = AttnPool(s, d, "pool")
        self.w_head = s.uniform("head.w", (config.W, d), d)
        self.b_head = s.zeros("head.b", (config.W,))

    def _run_direction(self, direction: str, h: Tensor, extra,
                       train: bool, rng) -> Tensor:
        reverse = direction == "bwd"
        for i in range(self.config.n_layers):
            w, u, b = self.layers[direction, i]
            h = lstm_layer(h, w, u, b, reverse=reverse,
                           extra=extra if i == 0 else None)
            if i + 1 < self.config.n_layers:
                h = dropout(h, self.config.dropout, train, rng)
        return h

    def _forward(self, batch: Batch, train: bool, rng) -> Tensor:
        h = linear(Tensor(batch.x[..., None]), self.w_in, self.b_in)
        if self.temporal is not None:
            h = h + self.temporal(batch.hour_idx, batch.dow_idx)
        h = dropout(h, self.config.dropout, train, rng)
        extra = None
        if self._weather_active(batch):
            extra = _step_inject_forward(self, Tensor(batch.weather))
        f = self._run_direction("fwd", h, extra, train, rng)
        if not self.config.bidirectional:
            enc = f
        else:
            b = self._run_direction("bwd", h, extra, train, rng)
            enc = linear(concat([f, b], axis=2), self.fuse_w, self.fuse_b)
        c = self.pool(enc)
        self.pool_weights = self.pool.last_weights
        return linear(c, self.w_head, self.b_head)


_ARCH_CLASSES = {
    "s_mamba": SMamba,
    "powermamba": PowerMamba,
    "patchtst": PatchTST,
    "itransformer": ITransformer,
    "lstm": Lstm,
}


def build_model(cfg: ModelConfig) -> ForecastModel:
    return _ARCH_CLASSES[cfg.arch](cfg)


def param_count(model: ForecastModel) -> int:
    return sum(p.data.size for p in model.parameters())


def param_breakdown(model: ForecastModel) -> dict[str, int]:
    """Scalar parameter totals grouped by top-level submodule name."""
    out: dict[str, int] = {}
    for name, p in model.params.items():
        group = name.split(".", 1)[0]
        out[group] = out.get(group, 0) + p.data.size
    return out


# ---------------------------------------------------------------- fusion hooks
# Forward passes for the fusion parameter groups created by attach_fusion.
# They live here because each is welded to one architecture's forward; the
# strategy selection and parameter creation live in the fusion module.


def _fusion_mlp_forward(model: ForecastModel, weather: Tensor) -> Tensor:
    p = model.params
    hidden = activation(linear(weather, p["fusion.mlp.w1"], p["fusion.mlp.b1"]),
                        "gelu")
    return linear(hidden, p["fusion.mlp.w2"], p["fusion.mlp.b2"])


def _weather_patches_forward(model: PatchTST, batch: Batch) -> Tensor:
    """Patch every covariate with the shared fusion embedding: (B, F*n, d)."""
    p = model.params
    per_cov = []
    F = batch.weather.shape[2]
    for f in range(F):
        patches = Tensor(batch.weather[:, :, f])[:, model.patch_idx]
        emb = linear(patches, p["fusion.patch_embed.w"],
                     p["fusion.patch_embed.b"]) + p["fusion.pos"]
        per_cov.append(emb)
    return concat(per_cov, axis=1)


def _cross_attn_forward(model: PatchTST, i: int, h: Tensor,
                        weather_kv: Tensor) -> Tensor:
    p = model.params
    q = layer_norm(h, p[f"fusion.b{i}.ln.gain"], p[f"fusion.b{i}.ln.shift"])
    return multi_head_attention(
        q, weather_kv, weather_kv,
        p[f"fusion.b{i}.xattn.wq"], p[f"fusion.b{i}.xattn.wk"],
        p[f"fusion.b{i}.xattn.wv"], p[f"fusion.b{i}.xattn.wo"],
        model.config.heads,
        bq=p[f"fusion.b{i}.xattn.bq"], bv=p[f"fusion.b{i}.xattn.bv"],
        bo=p[f"fusion.b{i}.xattn.bo"])


def _weather_tokens_forward(model: ITransformer, batch: Batch) -> list[Tensor]:
    tokens = []
    p = model.params
    for f, name in enumerate(model.fusion_spec.covariate_names):
        gate = p[f"fusion.gate_{name}"]
        if float(gate.data) == 0.0:
            continue   # structural drop: zero gate == token absent
        emb = linear(Tensor(batch.weather[:, :, f]),
                     p[f"fusion.embed_{name}.w"], p[f"fusion.embed_{name}.b"])
        tokens.append(emb * gate)
    return tokens


def _step_inject_forward(model: Lstm, weather: Tensor) -> Tensor:
    p = model.params
    emb = linear(weather, p["fusion.embed.w"], p["fusion.embed.b"])
    return linear(emb, p["fusion.inject.w"], p["fusion.inject.b"])
