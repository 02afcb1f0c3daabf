"""Architecture-matched weather fusion with an exact on/off toggle.

attach_fusion adds a named fusion parameter group to a built model without
touching any existing parameter; the matching forward hooks live next to the
architectures.  Withheld weather is a structural bypass, not zero-filled
inputs, so toggling weather off reproduces the load-only forward bit for bit.
"""

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import BadConfig, CovariateMismatch, StrategyMismatch
from .models import ForecastModel, PatchTST
from .series import Batch

STRATEGIES = ("early_sum", "pre_decomp_sum", "patch_cross_attn",
              "variate_tokens", "step_concat")

STRATEGY_FOR_ARCH = {
    "s_mamba": "early_sum",
    "powermamba": "pre_decomp_sum",
    "patchtst": "patch_cross_attn",
    "itransformer": "variate_tokens",
    "lstm": "step_concat",
}


@dataclass
class FusionSpec:
    mode: str
    strategy: str
    covariate_names: tuple = ()
    lag_per_covariate: tuple = ()

    def __post_init__(self):
        self.covariate_names = tuple(self.covariate_names)
        self.lag_per_covariate = tuple(self.lag_per_covariate)
        if self.mode not in ("none", "temporal", "weather"):
            raise BadConfig(f"unknown fusion mode {self.mode!r}")
        if self.strategy not in STRATEGIES:
            raise BadConfig(f"unknown fusion strategy {self.strategy!r}")
        if len(self.covariate_names) != len(self.lag_per_covariate):
            raise CovariateMismatch(
                f"{len(self.covariate_names)} covariate names vs "
                f"{len(self.lag_per_covariate)} lags")


def _checksum(params: dict) -> dict[str, str]:
    return {name: hashlib.sha256(p.data.tobytes()).hexdigest()
            for name, p in params.items()}


def attach_fusion(model: ForecastModel, spec: FusionSpec) -> ForecastModel:
    """Add the fusion parameter group for the model's architecture.

    Only the weather mode creates parameters; the temporal control reuses the
    plumbing that already exists.  Existing parameter values are checksummed
    before and after as a guard on the decoupling contract.
    """
    cfg = model.config
    expected = STRATEGY_FOR_ARCH[cfg.arch]
    if spec.strategy != expected:
        raise StrategyMismatch(
            f"{cfg.arch} requires strategy {expected!r}, got {spec.strategy!r}")
    if spec.mode != cfg.fusion_mode:
        raise StrategyMismatch(
            f"spec mode {spec.mode!r} != model fusion_mode {cfg.fusion_mode!r}")
    if spec.mode == "weather":
        if not spec.covariate_names:
            raise StrategyMismatch("weather mode requires covariate_count >= 1")
        if len(spec.covariate_names) != cfg.covariate_count:
            raise CovariateMismatch(
                f"spec has {len(spec.covariate_names)} covariates, "
                f"config expects {cfg.covariate_count}")

    before = _checksum(model.params)
    if spec.mode == "weather":
        _create_params(model, spec)
    after = {name: h for name, h in _checksum(model.params).items()
             if name in before}
    if after != before:
        raise BadConfig("fusion attach mutated pre-existing parameters")
    model.fusion_spec = spec
    return model


NEUTRAL = 0.01   # output-side init scale: fusion starts near (not at) silent


def _create_params(model: ForecastModel, spec: FusionSpec):
    s, cfg = model.store, model.config
    d, F = cfg.d_model, len(spec.covariate_names)
    strategy = spec.strategy
    if strategy in ("early_sum", "pre_decomp_sum"):
        s.uniform("fusion.mlp.w1", (4 * d, F), F)
        s.zeros("fusion.mlp.b1", (4 * d,))
        s.uniform("fusion.mlp.w2", (d, 4 * d), 4 * d, scale=NEUTRAL)
        s.zeros("fusion.mlp.b2", (d,))
    elif strategy == "patch_cross_attn":
        assert isinstance(model, PatchTST)
        P = cfg.patch_len
        s.uniform("fusion.patch_embed.w", (d, P), P)
        s.zeros("fusion.patch_embed.b", (d,))
        s.uniform("fusion.pos", (model.n_patches, d), d)
        for i in range(cfg.n_layers):
            s.constant(f"fusion.b{i}.ln.gain", np.ones(d))
            s.zeros(f"fusion.b{i}.ln.shift", (d,))
            for w in ("wq", "wk", "wv"):
                s.uniform(f"fusion.b{i}.xattn.{w}", (d, d), d)
            s.uniform(f"fusion.b{i}.xattn.wo", (d, d), d, scale=NEUTRAL)
            for b in ("bq", "bv", "bo"):
                s.zeros(f"fusion.b{i}.xattn.{b}", (d,))
    elif strategy == "variate_tokens":
        for name in spec.covariate_names:
            s.uniform(f"fusion.embed_{name}.w", (d, cfg.L), cfg.L)
            s.zeros(f"fusion.embed_{name}.b", (d,))
            s.constant(f"fusion.gate_{name}", np.float64(1.0))
        s.constant("fusion.mix", np.float64(5 * NEUTRAL))
    elif strategy == "step_concat":
        s.uniform("fusion.embed.w", (d, F), F)
        s.zeros("fusion.embed.b", (d,))
        s.uniform("fusion.inject.w", (4 * d, d), d, scale=NEUTRAL)
        s.zeros("fusion.inject.b", (4 * d,))


def fusion_param_count(model: ForecastModel) -> int:
    return sum(p.data.size for name, p in model.params.items()
               if name.startswith("fusion."))


def forward_fused(model: ForecastModel, batch: Batch):
    """Forward with the fusion contract: weather present activates the fusion
    path; weather withheld bypasses it structurally."""
    if model.fusion_spec is None:
        raise BadConfig("model has no fusion attached")
    return model.forward(batch)


def temporal_control(model: ForecastModel, batch: Batch):
    """Matched-token control: same plumbing, covariate block limited to the
    temporal encodings."""
    if model.config.fusion_mode != "temporal":
        raise StrategyMismatch("temporal_control requires fusion_mode temporal")
    stripped = Batch(x=batch.x, hour_idx=batch.hour_idx, dow_idx=batch.dow_idx,
                     weather=None, y=batch.y, origins=batch.origins)
    return model.forward(stripped)
