"""Cross-modal attention and bilinear fusion, forward pass plus hand-derived
gradients.

Feature matrices are stored tokens-first, shape (T, d). Each modality runs a
self-attention block and then a cross-attention block whose queries come
from the other modality. The two enhanced streams are concatenated on the
feature axis into a joint matrix; a tanh bilinear form scores the relevance
of each token against each joint token; a ReLU projection mixes those
relevance maps back into each stream with a residual connection; and a mean
pool over tokens feeds a single-logit classifier head.

Orientation note: the math is often written with feature columns
(d x T). In that orientation the relevance coupling reads
W_rel @ C^T; with tokens-first storage the same product is C @ W_rel^T.
Every backward pass here is verified against central finite differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .errors import InputError
from .tensorfile import parse_metadata, read_tensor, write_tensor

MODALITIES = ("audio", "visual")
KINK_STEP_GUARD = 1e-6


@dataclass
class FeatureMatrix:
    """Token sequence of one modality, values shaped (tokens, dim)."""

    values: np.ndarray
    modality: str = "audio"

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[1] == 0:
            raise InputError(f"feature matrix must be (tokens, dim) with dim > 0, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise InputError("feature matrix contains non-finite entries")
        if self.modality not in MODALITIES:
            raise InputError(f"modality must be one of {MODALITIES}, got {self.modality!r}")
        self.values = values

    @property
    def num_tokens(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]


@dataclass
class AttentionParams:
    """Query/key/value/output projections of one attention block, each (d, d)."""

    w_query: np.ndarray
    w_key: np.ndarray
    w_value: np.ndarray
    w_output: np.ndarray
    num_heads: int = 1

    def __post_init__(self) -> None:
        mats = [self.w_query, self.w_key, self.w_value, self.w_output]
        d = np.asarray(self.w_query).shape[0]
        for name, m in zip(("w_query", "w_key", "w_value", "w_output"), mats):
            m = np.asarray(m, dtype=np.float64)
            if m.shape != (d, d):
                raise InputError(f"{name} must be ({d}, {d}), got {m.shape}")
            setattr(self, name, m)
        if self.num_heads < 1 or d % self.num_heads != 0:
            raise InputError(f"num_heads {self.num_heads} must divide dim {d}")

    @property
    def dim(self) -> int:
        return self.w_query.shape[0]


@dataclass
class FusionParams:
    """All learnable blocks of the fusion model.

    Shapes for dim d, hidden dim h, tokens T:
      attention blocks        4 x (d, d) each
      w_joint_audio/visual    (d, 2d)   bilinear projections
      w_audio/w_visual        (h, d)    feature paths into the ReLU maps
      w_rel_audio/visual      (h, T)    relevance-map paths (token-tied)
      w_att_audio/visual      (d, h)    projections back, residual added
      w_head (2d,), b_head    classifier
    """

    dim: int
    hidden_dim: int
    tokens: int
    audio_self: AttentionParams
    audio_cross: AttentionParams
    visual_self: AttentionParams
    visual_cross: AttentionParams
    w_joint_audio: np.ndarray
    w_joint_visual: np.ndarray
    w_audio: np.ndarray
    w_visual: np.ndarray
    w_rel_audio: np.ndarray
    w_rel_visual: np.ndarray
    w_att_audio: np.ndarray
    w_att_visual: np.ndarray
    w_head: np.ndarray
    b_head: float

    def __post_init__(self) -> None:
        d, h, t = self.dim, self.hidden_dim, self.tokens
        if min(d, h, t) < 1:
            raise InputError(f"dim/hidden_dim/tokens must be >= 1, got {d}/{h}/{t}")
        expected = {
            "w_joint_audio": (d, 2 * d),
            "w_joint_visual": (d, 2 * d),
            "w_audio": (h, d),
            "w_visual": (h, d),
            "w_rel_audio": (h, t),
            "w_rel_visual": (h, t),
            "w_att_audio": (d, h),
            "w_att_visual": (d, h),
            "w_head": (2 * d,),
        }
        for name, shape in expected.items():
            m = np.asarray(getattr(self, name), dtype=np.float64)
            if m.shape != shape:
                raise InputError(f"{name} must have shape {shape}, got {m.shape}")
            if not np.all(np.isfinite(m)):
                raise InputError(f"{name} contains non-finite entries")
            setattr(self, name, m)
        for name in ("audio_self", "audio_cross", "visual_self", "visual_cross"):
            block = getattr(self, name)
            if block.dim != d:
                raise InputError(f"{name} uses dim {block.dim}, expected {d}")
        self.b_head = float(self.b_head)


@dataclass
class FusionTrace:
    """Every intermediate of one forward pass, for inspection and goldens."""

    joint: np.ndarray              # (T, 2d)
    relevance_audio: np.ndarray    # (T, T), tanh-bounded
    relevance_visual: np.ndarray
    attention_map_audio: np.ndarray  # (T, h), ReLU output
    attention_map_visual: np.ndarray
    attended_audio: np.ndarray     # (T, d), residual stream
    attended_visual: np.ndarray
    logit: float
    prob: float

    _GOLDEN_FIELDS = (
        "joint",
        "relevance_audio",
        "relevance_visual",
        "attention_map_audio",
        "attention_map_visual",
        "attended_audio",
        "attended_visual",
    )


# --- primitive blocks (forward + backward) -----------------------------------


def _attention_forward(p: AttentionParams, q_in, k_in, v_in):
    d = p.dim
    heads, dk = p.num_heads, d // p.num_heads
    q = q_in @ p.w_query.T  # (Tq, d)
    k = k_in @ p.w_key.T    # (Tk, d)
    v = v_in @ p.w_value.T  # (Tk, d)
    scale = 1.0 / math.sqrt(dk)

    def split(m):
        return m.reshape(m.shape[0], heads, dk).transpose(1, 0, 2)  # (H, T, dk)

    qh, kh, vh = split(q), split(k), split(v)
    scores = qh @ kh.transpose(0, 2, 1) * scale  # (H, Tq, Tk)
    shifted = scores - scores.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    attn = exp / exp.sum(axis=-1, keepdims=True)  # rows sum to 1
    oh = attn @ vh  # (H, Tq, dk)
    merged = oh.transpose(1, 0, 2).reshape(q_in.shape[0], d)
    out = merged @ p.w_output.T
    cache = (q_in, k_in, v_in, qh, kh, vh, attn, merged, scale)
    return out, cache


def _attention_backward(p: AttentionParams, cache, d_out):
    q_in, k_in, v_in, qh, kh, vh, attn, merged, scale = cache
    heads, dk = p.num_heads, p.dim // p.num_heads
    tq = q_in.shape[0]

    d_w_output = d_out.T @ merged
    d_merged = d_out @ p.w_output
    d_oh = d_merged.reshape(tq, heads, dk).transpose(1, 0, 2)
    d_attn = d_oh @ vh.transpose(0, 2, 1)
    d_vh = attn.transpose(0, 2, 1) @ d_oh
    d_scores = attn * (d_attn - (d_attn * attn).sum(axis=-1, keepdims=True))
    d_qh = d_scores @ kh * scale
    d_kh = d_scores.transpose(0, 2, 1) @ qh * scale

    def merge(mh, tokens):
        return mh.transpose(1, 0, 2).reshape(tokens, p.dim)

    d_q = merge(d_qh, tq)
    d_k = merge(d_kh, k_in.shape[0])
    d_v = merge(d_vh, v_in.shape[0])
    grads = {
        "w_query": d_q.T @ q_in,
        "w_key": d_k.T @ k_in,
        "w_value": d_v.T @ v_in,
        "w_output": d_w_output,
    }
    return d_q @ p.w_query, d_k @ p.w_key, d_v @ p.w_value, grads


def _bilinear_forward(x, joint, w):
    # relevance[t, u] = tanh(x[t] . w . joint[u] / sqrt(d))
    scale = 1.0 / math.sqrt(x.shape[1])
    projected = x @ w  # (T, 2d)
    rel = np.tanh(projected @ joint.T * scale)
    return rel, (x, joint, w, projected, rel, scale)


def _bilinear_backward(cache, d_rel):
    x, joint, w, projected, rel, scale = cache
    d_pre = d_rel * (1.0 - rel * rel)
    d_projected = d_pre @ joint * scale
    d_joint = d_pre.T @ projected * scale
    d_x = d_projected @ w.T
    d_w = x.T @ d_projected
    return d_x, d_joint, d_w


def _attended_forward(x, rel, w_feat, w_rel, w_att):
    h_pre = x @ w_feat.T + rel @ w_rel.T  # (T, h)
    h = np.maximum(h_pre, 0.0)
    x_j = h @ w_att.T + x
    return x_j, h, (x, rel, h_pre, h, w_feat, w_rel, w_att)


def _attended_backward(cache, d_xj):
    x, rel, h_pre, h, w_feat, w_rel, w_att = cache
    d_h = d_xj @ w_att
    d_w_att = d_xj.T @ h
    d_hpre = d_h * (h_pre > 0.0)
    d_x = d_xj + d_hpre @ w_feat
    d_rel = d_hpre @ w_rel
    grads = {
        "w_feat": d_hpre.T @ x,
        "w_rel": d_hpre.T @ rel,
        "w_att": d_w_att,
    }
    return d_x, d_rel, grads


# --- public single ops --------------------------------------------------------


def scaled_dot_attention(
    query: FeatureMatrix,
    key: FeatureMatrix,
    value: FeatureMatrix,
    params: AttentionParams,
) -> FeatureMatrix:
    """softmax(Q K^T / sqrt(d_k)) V with learned projections on all paths."""
    d = params.dim
    for name, feat in (("query", query), ("key", key), ("value", value)):
        if feat.dim != d:
            raise InputError(f"{name} dim {feat.dim} does not match params dim {d}")
    if key.num_tokens != value.num_tokens:
        raise InputError(
            f"key has {key.num_tokens} tokens but value has {value.num_tokens}"
        )
    out, _ = _attention_forward(params, query.values, key.values, value.values)
    return FeatureMatrix(values=out, modality=value.modality)


def bilinear_relevance(x: FeatureMatrix, joint: np.ndarray, w: np.ndarray) -> np.ndarray:
    """tanh bilinear relevance map between tokens and joint tokens.

    Entries are strictly inside (-1, 1) in exact arithmetic; returns shape
    (x tokens, joint tokens).
    """
    joint = np.asarray(joint, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if joint.ndim != 2 or w.ndim != 2:
        raise InputError("joint and w must be 2-D")
    if w.shape[0] != x.dim or w.shape[1] != joint.shape[1]:
        raise InputError(
            f"projection {w.shape} does not compose with x dim {x.dim} "
            f"and joint width {joint.shape[1]}"
        )
    rel, _ = _bilinear_forward(x.values, joint, w)
    return rel


def attended_fusion(
    x: FeatureMatrix,
    relevance: np.ndarray,
    w_feat: np.ndarray,
    w_rel: np.ndarray,
    w_att: np.ndarray,
) -> FeatureMatrix:
    """ReLU attention map from feature and relevance paths, projected back
    onto the stream with a residual: x_j = w_att . ReLU(...) + x.

    With w_att = 0 the output equals x exactly.
    """
    relevance = np.asarray(relevance, dtype=np.float64)
    w_feat = np.asarray(w_feat, dtype=np.float64)
    w_rel = np.asarray(w_rel, dtype=np.float64)
    w_att = np.asarray(w_att, dtype=np.float64)
    t, d = x.values.shape
    h = w_feat.shape[0]
    if w_feat.shape != (h, d):
        raise InputError(f"w_feat must be (hidden, {d}), got {w_feat.shape}")
    if relevance.ndim != 2 or relevance.shape[0] != t:
        raise InputError(f"relevance must be ({t}, *), got {relevance.shape}")
    if w_rel.shape != (h, relevance.shape[1]):
        raise InputError(f"w_rel must be ({h}, {relevance.shape[1]}), got {w_rel.shape}")
    if w_att.shape != (d, h):
        raise InputError(f"w_att must be ({d}, {h}), got {w_att.shape}")
    x_j, _, _ = _attended_forward(x.values, relevance, w_feat, w_rel, w_att)
    return FeatureMatrix(values=x_j, modality=x.modality)


# --- full model ---------------------------------------------------------------


def _fuse_forward(xa, xv, p: FusionParams):
    a_self, c_as = _attention_forward(p.audio_self, xa, xa, xa)
    a1 = xa + a_self
    v_self, c_vs = _attention_forward(p.visual_self, xv, xv, xv)
    v1 = xv + v_self
    # queries come from the other modality
    a_cross, c_ac = _attention_forward(p.audio_cross, v1, a1, a1)
    a2 = a1 + a_cross
    v_cross, c_vc = _attention_forward(p.visual_cross, a1, v1, v1)
    v2 = v1 + v_cross

    joint = np.concatenate([a2, v2], axis=1)  # (T, 2d)
    rel_a, c_ba = _bilinear_forward(a2, joint, p.w_joint_audio)
    rel_v, c_bv = _bilinear_forward(v2, joint, p.w_joint_visual)
    xja, h_a, c_aa = _attended_forward(a2, rel_a, p.w_audio, p.w_rel_audio, p.w_att_audio)
    xjv, h_v, c_av = _attended_forward(v2, rel_v, p.w_visual, p.w_rel_visual, p.w_att_visual)

    fused = np.concatenate([xja, xjv], axis=1)  # (T, 2d)
    pooled = fused.mean(axis=0)
    logit = float(p.w_head @ pooled + p.b_head)
    trace = FusionTrace(
        joint=joint,
        relevance_audio=rel_a,
        relevance_visual=rel_v,
        attention_map_audio=h_a,
        attention_map_visual=h_v,
        attended_audio=xja,
        attended_visual=xjv,
        logit=logit,
        prob=float(1.0 / (1.0 + np.exp(-logit))),
    )
    cache = {
        "attn": (c_as, c_vs, c_ac, c_vc),
        "bilinear": (c_ba, c_bv),
        "attended": (c_aa, c_av),
        "pooled": pooled,
        "tokens": xa.shape[0],
    }
    return trace, cache


def _fuse_backward(p: FusionParams, cache, d_logit: float = 1.0):
    c_as, c_vs, c_ac, c_vc = cache["attn"]
    c_ba, c_bv = cache["bilinear"]
    c_aa, c_av = cache["attended"]
    t = cache["tokens"]
    d = p.dim

    grads: dict[str, np.ndarray] = {}
    grads["b_head"] = np.array(d_logit)
    grads["w_head"] = d_logit * cache["pooled"]
    d_fused = np.tile(d_logit * p.w_head / t, (t, 1))  # (T, 2d)
    d_xja, d_xjv = d_fused[:, :d], d_fused[:, d:]

    d_a2, d_rel_a, g = _attended_backward(c_aa, d_xja)
    grads["w_audio"], grads["w_rel_audio"], grads["w_att_audio"] = (
        g["w_feat"], g["w_rel"], g["w_att"],
    )
    d_v2, d_rel_v, g = _attended_backward(c_av, d_xjv)
    grads["w_visual"], grads["w_rel_visual"], grads["w_att_visual"] = (
        g["w_feat"], g["w_rel"], g["w_att"],
    )

    dx, d_joint, grads["w_joint_audio"] = _bilinear_backward(c_ba, d_rel_a)
    d_a2 = d_a2 + dx
    dx, dj, grads["w_joint_visual"] = _bilinear_backward(c_bv, d_rel_v)
    d_v2 = d_v2 + dx
    d_joint = d_joint + dj
    d_a2 = d_a2 + d_joint[:, :d]
    d_v2 = d_v2 + d_joint[:, d:]

    # a2 = a1 + attn(audio_cross, q=v1, k=a1, v=a1)
    dq, dk, dv, g = _attention_backward(p.audio_cross, c_ac, d_a2)
    for key, val in g.items():
        grads[f"audio_cross.{key}"] = val
    d_a1 = d_a2 + dk + dv
    d_v1 = dq
    # v2 = v1 + attn(visual_cross, q=a1, k=v1, v=v1)
    dq, dk, dv, g = _attention_backward(p.visual_cross, c_vc, d_v2)
    for key, val in g.items():
        grads[f"visual_cross.{key}"] = val
    d_v1 = d_v1 + d_v2 + dk + dv
    d_a1 = d_a1 + dq

    dq, dk, dv, g = _attention_backward(p.audio_self, c_as, d_a1)
    for key, val in g.items():
        grads[f"audio_self.{key}"] = val
    grads["x_a"] = d_a1 + dq + dk + dv
    dq, dk, dv, g = _attention_backward(p.visual_self, c_vs, d_v1)
    for key, val in g.items():
        grads[f"visual_self.{key}"] = val
    grads["x_v"] = d_v1 + dq + dk + dv
    return grads


def fuse_forward(x_a: FeatureMatrix, x_v: FeatureMatrix, params: FusionParams) -> FusionTrace:
    """Run the full fusion model over one audio/visual token pair."""
    if x_a.num_tokens != x_v.num_tokens:
        raise InputError(
            f"token counts differ: audio {x_a.num_tokens} vs visual {x_v.num_tokens}"
        )
    if x_a.dim != params.dim or x_v.dim != params.dim:
        raise InputError(
            f"feature dims ({x_a.dim}, {x_v.dim}) do not match params dim {params.dim}"
        )
    if x_a.num_tokens != params.tokens:
        raise InputError(
            f"params are tied to {params.tokens} tokens, inputs have {x_a.num_tokens}"
        )
    trace, _ = _fuse_forward(x_a.values, x_v.values, params)
    return trace


# --- parameter plumbing -------------------------------------------------------

_ATTN_BLOCKS = ("audio_self", "audio_cross", "visual_self", "visual_cross")
_ATTN_FIELDS = ("w_query", "w_key", "w_value", "w_output")
_DENSE_FIELDS = (
    "w_joint_audio",
    "w_joint_visual",
    "w_audio",
    "w_visual",
    "w_rel_audio",
    "w_rel_visual",
    "w_att_audio",
    "w_att_visual",
    "w_head",
    "b_head",
)


def params_to_arrays(p: FusionParams) -> dict[str, np.ndarray]:
    """Named view of every learnable array, in a fixed canonical order."""
    out: dict[str, np.ndarray] = {}
    for block in _ATTN_BLOCKS:
        attn = getattr(p, block)
        for field_name in _ATTN_FIELDS:
            out[f"{block}.{field_name}"] = getattr(attn, field_name)
    for name in _DENSE_FIELDS:
        value = getattr(p, name)
        out[name] = np.asarray(value, dtype=np.float64)
    return out


def arrays_to_params(arrays: dict[str, np.ndarray], dim: int, hidden_dim: int, tokens: int, num_heads: int = 1) -> FusionParams:
    blocks = {
        block: AttentionParams(
            **{f: arrays[f"{block}.{f}"] for f in _ATTN_FIELDS}, num_heads=num_heads
        )
        for block in _ATTN_BLOCKS
    }
    dense = {name: arrays[name] for name in _DENSE_FIELDS}
    dense["b_head"] = float(np.asarray(dense["b_head"]).reshape(()))
    return FusionParams(dim=dim, hidden_dim=hidden_dim, tokens=tokens, **blocks, **dense)


def init_params(
    dim: int = 8,
    hidden_dim: int = 12,
    tokens: int = 4,
    num_heads: int = 1,
    seed: int = 0,
) -> FusionParams:
    """Seeded random parameters; the draw order is fixed and part of the
    golden-trace contract."""
    rng = np.random.default_rng([seed, 11])

    def attn() -> AttentionParams:
        mats = [rng.standard_normal((dim, dim)) / math.sqrt(dim) for _ in range(4)]
        return AttentionParams(*mats, num_heads=num_heads)

    blocks = {name: attn() for name in _ATTN_BLOCKS}
    scale = 1.0 / math.sqrt(dim)
    return FusionParams(
        dim=dim,
        hidden_dim=hidden_dim,
        tokens=tokens,
        **blocks,
        w_joint_audio=rng.standard_normal((dim, 2 * dim)) * scale,
        w_joint_visual=rng.standard_normal((dim, 2 * dim)) * scale,
        w_audio=rng.standard_normal((hidden_dim, dim)) * scale,
        w_visual=rng.standard_normal((hidden_dim, dim)) * scale,
        w_rel_audio=rng.standard_normal((hidden_dim, tokens)) * scale,
        w_rel_visual=rng.standard_normal((hidden_dim, tokens)) * scale,
        w_att_audio=rng.standard_normal((dim, hidden_dim)) * scale,
        w_att_visual=rng.standard_normal((dim, hidden_dim)) * scale,
        w_head=rng.standard_normal(2 * dim) / math.sqrt(2 * dim),
        b_head=0.1 * rng.standard_normal(),
    )


def golden_inputs(dim: int, tokens: int, seed: int = 0) -> tuple[FeatureMatrix, FeatureMatrix]:
    rng = np.random.default_rng([seed, 7])
    x_a = FeatureMatrix(rng.standard_normal((tokens, dim)), "audio")
    x_v = FeatureMatrix(rng.standard_normal((tokens, dim)), "visual")
    return x_a, x_v


# --- gradient checking --------------------------------------------------------


@dataclass
class GradCheckReport:
    """Outcome of a finite-difference sweep over random coordinates."""

    max_rel_error: float
    checked: int
    skipped: tuple[int, ...]  # coordinate indices at ReLU kinks
    worst_coordinate: int

    @property
    def probed(self) -> int:
        return self.checked + len(self.skipped)


def check_gradients(func, x0: np.ndarray, probes: int = 20, step: float = 1e-5, seed: int = 0) -> GradCheckReport:
    """Compare an analytic gradient against central differences.

    ``func(x)`` returns (loss, grad_or_None, relu_preacts_or_None); the
    gradient is only required at the base point. A probe whose +-step
    evaluations land on opposite sides of a ReLU boundary is skipped and
    reported instead of scored. Relative error uses a 1e-6 floor on the
    denominator so near-zero gradient pairs compare absolutely.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    loss0, grad, _ = func(x0)
    if grad is None:
        raise InputError("func must return the analytic gradient at the base point")
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != x0.shape:
        raise InputError(f"gradient shape {grad.shape} does not match point {x0.shape}")
    if not np.all(np.isfinite(grad)):
        coord = int(np.flatnonzero(~np.isfinite(grad.ravel()))[0])
        raise InputError(f"analytic gradient is non-finite at coordinate {coord}")
    if not np.isfinite(loss0):
        raise InputError("loss is non-finite at the base point")

    rng = np.random.default_rng([seed, 3])
    n = x0.size
    coords = rng.choice(n, size=min(probes, n), replace=False)

    max_err = 0.0
    worst = -1
    checked = 0
    skipped: list[int] = []
    for c in coords:
        c = int(c)
        xp = x0.copy()
        xp[c] += step
        xm = x0.copy()
        xm[c] -= step
        loss_p, _, kink_p = func(xp)
        loss_m, _, kink_m = func(xm)
        if kink_p is not None and kink_m is not None:
            crossed = np.sign(kink_p) != np.sign(kink_m)
            near_zero = (np.abs(kink_p) < KINK_STEP_GUARD) | (np.abs(kink_m) < KINK_STEP_GUARD)
            if np.any(crossed | near_zero):
                skipped.append(c)
                continue
        fd = (loss_p - loss_m) / (2.0 * step)
        if not np.isfinite(fd):
            raise InputError(f"finite difference is non-finite at coordinate {c}")
        denom = max(abs(fd), abs(grad.ravel()[c]), 1e-6)
        err = abs(fd - grad.ravel()[c]) / denom
        checked += 1
        if err > max_err:
            max_err = err
            worst = c
    return GradCheckReport(
        max_rel_error=max_err, checked=checked, skipped=tuple(skipped), worst_coordinate=worst
    )


def _pack(arrays: dict[str, np.ndarray]) -> tuple[np.ndarray, list[tuple[str, tuple[int, ...], int]]]:
    layout = []
    chunks = []
    offset = 0
    for name in sorted(arrays):
        arr = np.asarray(arrays[name], dtype=np.float64)
        layout.append((name, arr.shape, offset))
        chunks.append(arr.ravel())
        offset += arr.size
    return np.concatenate(chunks), layout


def _unpack(vec: np.ndarray, layout) -> dict[str, np.ndarray]:
    out = {}
    for name, shape, offset in layout:
        size = int(np.prod(shape)) if shape else 1
        out[name] = vec[offset : offset + size].reshape(shape)
    return out


def grad_check(
    op: str = "fuse",
    dim: int = 8,
    hidden_dim: int = 12,
    tokens: int = 5,
    num_heads: int = 1,
    probes: int = 20,
    step: float = 1e-5,
    seed: int = 0,
) -> GradCheckReport:
    """Finite-difference audit of one fusion op's hand-derived gradients.

    ``op`` is one of "attention", "bilinear", "attended", or "fuse". The
    scalar loss is the sum of the op's output (the logit for "fuse");
    gradients are probed over parameters and inputs together.
    """
    rng = np.random.default_rng([seed, 5])

    if op == "fuse":
        params = init_params(dim, hidden_dim, tokens, num_heads=num_heads, seed=seed)
        arrays = dict(params_to_arrays(params))
        arrays["x_a"] = rng.standard_normal((tokens, dim))
        arrays["x_v"] = rng.standard_normal((tokens, dim))
        vec0, layout = _pack(arrays)

        def func(vec):
            a = _unpack(vec, layout)
            p = arrays_to_params(a, dim, hidden_dim, tokens, num_heads=num_heads)
            trace, cache = _fuse_forward(a["x_a"], a["x_v"], p)
            grads = _fuse_backward(p, cache)
            gvec, _ = _pack({name: grads[name] for name, _, _ in layout})
            kinks = np.concatenate(
                [
                    (cache["attended"][0][2]).ravel(),  # audio h_pre
                    (cache["attended"][1][2]).ravel(),  # visual h_pre
                ]
            )
            return trace.logit, gvec, kinks

    elif op == "attention":
        params = AttentionParams(
            *(rng.standard_normal((dim, dim)) / math.sqrt(dim) for _ in range(4)),
            num_heads=num_heads,
        )
        arrays = {
            "w_query": params.w_query,
            "w_key": params.w_key,
            "w_value": params.w_value,
            "w_output": params.w_output,
            "q_in": rng.standard_normal((tokens, dim)),
            "k_in": rng.standard_normal((tokens, dim)),
            "v_in": rng.standard_normal((tokens, dim)),
        }
        vec0, layout = _pack(arrays)

        def func(vec):
            a = _unpack(vec, layout)
            p = AttentionParams(a["w_query"], a["w_key"], a["w_value"], a["w_output"], num_heads=num_heads)
            out, cache = _attention_forward(p, a["q_in"], a["k_in"], a["v_in"])
            dq, dk, dv, g = _attention_backward(p, cache, np.ones_like(out))
            g.update({"q_in": dq, "k_in": dk, "v_in": dv})
            gvec, _ = _pack({name: g[name] for name, _, _ in layout})
            return float(out.sum()), gvec, None

    elif op == "bilinear":
        arrays = {
            "w": rng.standard_normal((dim, 2 * dim)) / math.sqrt(dim),
            "x": rng.standard_normal((tokens, dim)),
            "joint": rng.standard_normal((tokens, 2 * dim)),
        }
        vec0, layout = _pack(arrays)

        def func(vec):
            a = _unpack(vec, layout)
            rel, cache = _bilinear_forward(a["x"], a["joint"], a["w"])
            dx, dj, dw = _bilinear_backward(cache, np.ones_like(rel))
            gvec, _ = _pack({"w": dw, "x": dx, "joint": dj})
            return float(rel.sum()), gvec, None

    elif op == "attended":
        arrays = {
            "w_feat": rng.standard_normal((hidden_dim, dim)) / math.sqrt(dim),
            "w_rel": rng.standard_normal((hidden_dim, tokens)) / math.sqrt(tokens),
            "w_att": rng.standard_normal((dim, hidden_dim)) / math.sqrt(hidden_dim),
            "x": rng.standard_normal((tokens, dim)),
            "rel": np.tanh(rng.standard_normal((tokens, tokens))),
        }
        vec0, layout = _pack(arrays)

        def func(vec):
            a = _unpack(vec, layout)
            x_j, h, cache = _attended_forward(a["x"], a["rel"], a["w_feat"], a["w_rel"], a["w_att"])
            dx, drel, g = _attended_backward(cache, np.ones_like(x_j))
            gvec, _ = _pack(
                {"w_feat": g["w_feat"], "w_rel": g["w_rel"], "w_att": g["w_att"], "x": dx, "rel": drel}
            )
            return float(x_j.sum()), gvec, cache[2].ravel()

    else:
        raise InputError(f"unknown op {op!r}; expected attention, bilinear, attended, or fuse")

    return check_gradients(func, vec0, probes=probes, step=step, seed=seed)


# --- golden traces ------------------------------------------------------------


def _trace_flat(trace: FusionTrace) -> tuple[np.ndarray, str]:
    parts = [np.asarray(getattr(trace, name), dtype=np.float64).ravel() for name in FusionTrace._GOLDEN_FIELDS]
    parts.append(np.array([trace.logit]))
    layout = ",".join(
        f"{name}:{'x'.join(str(s) for s in np.asarray(getattr(trace, name)).shape)}"
        for name in FusionTrace._GOLDEN_FIELDS
    )
    layout += ",logit:1"
    return np.concatenate(parts), layout


def write_golden_trace(
    path: str | Path,
    seed: int = 11,
    dim: int = 8,
    hidden_dim: int = 12,
    tokens: int = 4,
    num_heads: int = 1,
) -> None:
    """Render the reference forward pass for the given seed and freeze it."""
    params = init_params(dim, hidden_dim, tokens, num_heads=num_heads, seed=seed)
    x_a, x_v = golden_inputs(dim, tokens, seed=seed)
    trace = fuse_forward(x_a, x_v, params)
    flat, layout = _trace_flat(trace)
    metadata = (
        f"fusion-golden v1; seed={seed}; dim={dim}; hidden_dim={hidden_dim}; "
        f"tokens={tokens}; heads={num_heads}; fields={layout}"
    )
    write_tensor(path, flat.astype(np.float32), metadata=metadata)


def check_golden_trace(path: str | Path) -> tuple[float, int]:
    """Recompute the frozen forward pass and compare.

    Returns (max absolute difference in float32, number of values). The
    comparison casts the recomputed float64 trace to float32, matching the
    container precision.
    """
    stored, metadata = read_tensor(path)
    meta = parse_metadata(metadata)
    try:
        seed = int(meta["seed"])
        dim = int(meta["dim"])
        hidden_dim = int(meta["hidden_dim"])
        tokens = int(meta["tokens"])
        heads = int(meta.get("heads", 1))
    except KeyError as exc:
        raise InputError(f"{path}: golden metadata is missing {exc}")
    params = init_params(dim, hidden_dim, tokens, num_heads=heads, seed=seed)
    x_a, x_v = golden_inputs(dim, tokens, seed=seed)
    trace = fuse_forward(x_a, x_v, params)
    flat, _ = _trace_flat(trace)
    if flat.size != stored.size:
        raise InputError(
            f"{path}: stored trace has {stored.size} values, recomputed has {flat.size}"
        )
    diff = np.abs(flat.astype(np.float32) - stored.ravel())
    return float(diff.max()), int(flat.size)
