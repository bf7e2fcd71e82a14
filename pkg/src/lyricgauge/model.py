"""Document model: twin embeddings -> bi-GRU -> pooled doc vector -> shared
projection -> per-aspect gated representations -> per-aspect heads.

Everything is plain numpy float64 with hand-written backward passes, so the
whole training step is deterministic given seeds and has no framework
dependency. Shapes use T for sentences per document, I for the combined twin
embedding width, H for the recurrent state width, P for the projected
document width, A for the number of aspects and K for head outputs.

The recurrent unit is the classic gated variant:

    r = sigmoid(Wr x + Ur h + br)
    z = sigmoid(Wz x + Uz h + bz)
    c = tanh(Wc x + Uc (r * h) + bc)
    h' = (1 - z) * c + z * h

run in both directions; sentence t's encoding is the concatenation of the
forward state at t and the backward state at t.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .corpus import N_ASPECTS

logger = logging.getLogger(__name__)


class ModelError(ValueError):
    """Raised for invalid shapes, non-finite activations or config mismatches."""


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = x - np.max(x, axis=axis, keepdims=True)
    ex = np.exp(shifted)
    return ex / np.sum(ex, axis=axis, keepdims=True)


@dataclass(frozen=True)
class BackboneConfig:
    """Width and wiring of the shared document encoder."""

    d_sem: int
    d_emo: int
    hidden: int
    proj: int
    pooling: str = "attention"
    n_aspects: int = N_ASPECTS

    def __post_init__(self) -> None:
        for name in ("d_sem", "d_emo", "hidden", "proj", "n_aspects"):
            if getattr(self, name) < 1:
                raise ModelError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.pooling not in ("attention", "mean"):
            raise ModelError(f"pooling must be 'attention' or 'mean', got {self.pooling!r}")

    @property
    def d_in(self) -> int:
        return self.d_sem + self.d_emo

    def to_dict(self) -> dict:
        return {"d_sem": self.d_sem, "d_emo": self.d_emo, "hidden": self.hidden,
                "proj": self.proj, "pooling": self.pooling, "n_aspects": self.n_aspects}

    @classmethod
    def from_dict(cls, payload: Mapping) -> "BackboneConfig":
        return cls(**{k: payload[k] for k in
                      ("d_sem", "d_emo", "hidden", "proj", "pooling", "n_aspects")})


@dataclass
class ModelParams:
    """Named float64 tensors in a fixed iteration order."""

    tensors: dict[str, np.ndarray]

    def names(self) -> list[str]:
        return list(self.tensors)

    def tensor_order(self) -> list[tuple[str, tuple[int, ...]]]:
        return [(name, tuple(t.shape)) for name, t in self.tensors.items()]

    def n_scalars(self) -> int:
        return sum(t.size for t in self.tensors.values())

    def flatten(self) -> np.ndarray:
        return np.concatenate([t.ravel() for t in self.tensors.values()])

    def load_flat(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != (self.n_scalars(),):
            raise ModelError(f"flat vector has {flat.size} scalars, expected {self.n_scalars()}")
        pos = 0
        for t in self.tensors.values():
            t[...] = flat[pos: pos + t.size].reshape(t.shape)
            pos += t.size

    def copy(self) -> "ModelParams":
        return ModelParams({name: t.copy() for name, t in self.tensors.items()})


def init_params(config: BackboneConfig, head_dim: int, with_rank_head: bool,
                seed: int) -> ModelParams:
    """Seeded uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) weights, zero biases.

    Tensor insertion order is fixed, so the same (config, head_dim,
    with_rank_head, seed) reproduces bit-identical parameters.
    """
    if head_dim < 1:
        raise ModelError(f"head_dim must be >= 1, got {head_dim}")
    rng = np.random.default_rng(seed)
    tensors: dict[str, np.ndarray] = {}

    def uni(name: str, shape: tuple[int, ...], fan_in: int) -> None:
        s = 1.0 / np.sqrt(fan_in)
        tensors[name] = rng.uniform(-s, s, size=shape)

    def zero(name: str, shape: tuple[int, ...]) -> None:
        tensors[name] = np.zeros(shape)

    I, H, P, A = config.d_in, config.hidden, config.proj, config.n_aspects
    for direction in ("fw", "bw"):
        uni(f"gru_{direction}_W", (3 * H, I), I)
        uni(f"gru_{direction}_U", (2 * H, H), H)
        uni(f"gru_{direction}_Uc", (H, H), H)
        zero(f"gru_{direction}_b", (3 * H,))
    if config.pooling == "attention":
        uni("pool_W", (H, 2 * H), 2 * H)
        zero("pool_b", (H,))
        uni("pool_v", (H,), H)
    uni("proj_W", (P, 2 * H), 2 * H)
    zero("proj_b", (P,))
    uni("attn_W", (A, P, P), P)
    uni("head_W", (A, head_dim, P), P)
    zero("head_b", (A, head_dim))
    if with_rank_head:
        uni("rank_W", (3, 3 * P), 3 * P)
        zero("rank_b", (3,))
    return ModelParams(tensors)


# ---------------------------------------------------------------------------
# Forward
# ---------------------------------------------------------------------------

def _gru_forward(W: np.ndarray, U: np.ndarray, Uc: np.ndarray, b: np.ndarray,
                 X: np.ndarray) -> tuple[np.ndarray, dict]:
    T = X.shape[0]
    H = Uc.shape[0]
    WX = X @ W.T + b
    R = np.empty((T, H))
    Z = np.empty((T, H))
    C = np.empty((T, H))
    Hprev = np.empty((T, H))
    RH = np.empty((T, H))
    out = np.empty((T, H))
    h = np.zeros(H)
    for t in range(T):
        Hprev[t] = h
        rz = U @ h
        r = sigmoid(WX[t, :H] + rz[:H])
        z = sigmoid(WX[t, H: 2 * H] + rz[H:])
        rh = r * h
        c = np.tanh(WX[t, 2 * H:] + Uc @ rh)
        h = (1.0 - z) * c + z * h
        R[t], Z[t], C[t], RH[t], out[t] = r, z, c, rh, h
    return out, {"X": X, "R": R, "Z": Z, "C": C, "Hprev": Hprev, "RH": RH}


def encode_document(params: ModelParams, config: BackboneConfig,
                    X: np.ndarray) -> tuple[np.ndarray, np.ndarray, dict]:
    """Encode a (T, d_in) sentence matrix into a pooled (2*hidden,) doc vector.

    Returns (doc, alpha, cache) where alpha holds the per-sentence pooling
    weights (uniform under mean pooling) and cache feeds the backward pass.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != config.d_in:
        raise ModelError(f"input must be (T, {config.d_in}), got {X.shape}")
    if X.shape[0] < 1:
        raise ModelError("document must contain at least one sentence")
    if not np.isfinite(X).all():
        raise ModelError("document matrix has non-finite entries")
    t = params.tensors
    hf, cache_f = _gru_forward(t["gru_fw_W"], t["gru_fw_U"], t["gru_fw_Uc"],
                               t["gru_fw_b"], X)
    hb, cache_b = _gru_forward(t["gru_bw_W"], t["gru_bw_U"], t["gru_bw_Uc"],
                               t["gru_bw_b"], X[::-1])
    O = np.concatenate([hf, hb[::-1]], axis=1)
    cache: dict = {"gru_f": cache_f, "gru_b": cache_b, "O": O}
    T = X.shape[0]
    if config.pooling == "attention":
        Aact = np.tanh(O @ t["pool_W"].T + t["pool_b"])
        e = Aact @ t["pool_v"]
        alpha = softmax(e)
        doc = alpha @ O
        cache["Aact"] = Aact
    else:
        alpha = np.full(T, 1.0 / T)
        doc = O.mean(axis=0)
    cache["alpha"] = alpha
    cache["doc"] = doc
    return doc, alpha, cache


def aspect_attention(params: ModelParams, x_in: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-aspect gated representation x_out[a] = x_in * (1 + softmax(x_in @ Wa)).

    The gate keeps the shared projection as a residual, so an untrained
    aspect still sees the document; rejects non-finite input.
    """
    x_in = np.asarray(x_in, dtype=np.float64)
    Wa = params.tensors["attn_W"]
    if x_in.shape != (Wa.shape[1],):
        raise ModelError(f"x_in must be ({Wa.shape[1]},), got {x_in.shape}")
    if not np.isfinite(x_in).all():
        raise ModelError("aspect attention input has non-finite entries")
    U = np.einsum("i,aij->aj", x_in, Wa)
    S = softmax(U, axis=1)
    Xout = x_in[None, :] * (1.0 + S)
    return Xout, S


@dataclass
class DocForward:
    """One document's forward activations plus the cache for backward."""

    x_in: np.ndarray        # (P,)   shared projected document
    x_out: np.ndarray       # (A, P) per-aspect representations
    logits: np.ndarray      # (A, K) per-aspect head outputs
    alpha: np.ndarray       # (T,)   sentence pooling weights
    doc: np.ndarray         # (2H,)  pooled document vector
    cache: dict = field(repr=False, default_factory=dict)


def forward(params: ModelParams, config: BackboneConfig, X: np.ndarray) -> DocForward:
    t = params.tensors
    doc, alpha, cache = encode_document(params, config, X)
    p = t["proj_W"] @ doc + t["proj_b"]
    x_in = np.tanh(p)
    Xout, S = aspect_attention(params, x_in)
    logits = np.einsum("akd,ad->ak", t["head_W"], Xout) + t["head_b"]
    cache["x_in"] = x_in
    cache["S"] = S
    return DocForward(x_in=x_in, x_out=Xout, logits=logits, alpha=alpha,
                      doc=doc, cache=cache)


# ---------------------------------------------------------------------------
# Backward
# ---------------------------------------------------------------------------

def zero_grads(params: ModelParams) -> dict[str, np.ndarray]:
    return {name: np.zeros_like(t) for name, t in params.tensors.items()}


def _gru_backward(W: np.ndarray, U: np.ndarray, Uc: np.ndarray, cache: dict,
                  gH: np.ndarray, grads: dict[str, np.ndarray], prefix: str) -> None:
    X, R, Z, C, Hprev, RH = (cache[k] for k in ("X", "R", "Z", "C", "Hprev", "RH"))
    T, H = R.shape
    GA = np.empty((T, 3 * H))
    carry = np.zeros(H)
    for t in range(T - 1, -1, -1):
        gh = gH[t] + carry
        gc = gh * (1.0 - Z[t])
        gz = gh * (Hprev[t] - C[t])
        ga_c = gc * (1.0 - C[t] ** 2)
        ga_z = gz * Z[t] * (1.0 - Z[t])
        g_rh = Uc.T @ ga_c
        gr = g_rh * Hprev[t]
        ga_r = gr * R[t] * (1.0 - R[t])
        GA[t, :H] = ga_r
        GA[t, H: 2 * H] = ga_z
        GA[t, 2 * H:] = ga_c
        carry = gh * Z[t] + U.T @ GA[t, : 2 * H] + g_rh * R[t]
    grads[prefix + "_W"] += GA.T @ X
    grads[prefix + "_b"] += GA.sum(axis=0)
    grads[prefix + "_U"] += GA[:, : 2 * H].T @ Hprev
    grads[prefix + "_Uc"] += GA[:, 2 * H:].T @ RH


def backward(params: ModelParams, config: BackboneConfig, fwd: DocForward,
             logit_grads: np.ndarray, xout_grads: np.ndarray | None = None,
             into: dict[str, np.ndarray] | None = None) -> dict[str, np.ndarray]:
    """Accumulate d(loss)/d(tensor) for one document.

    `logit_grads` is (A, K) = d loss / d logits; `xout_grads`, if given, is an
    extra (A, P) gradient injected at the per-aspect representations (used by
    losses that read x_out directly). Pass `into` to accumulate across
    documents without reallocating.
    """
    t = params.tensors
    grads = zero_grads(params) if into is None else into
    glogits = np.asarray(logit_grads, dtype=np.float64)
    if glogits.shape != fwd.logits.shape:
        raise ModelError(f"logit_grads must be {fwd.logits.shape}, got {glogits.shape}")
    cache = fwd.cache
    x_in, S, Xout = cache["x_in"], cache["S"], fwd.x_out

    grads["head_W"] += np.einsum("ak,ad->akd", glogits, Xout)
    grads["head_b"] += glogits
    gXout = np.einsum("akd,ak->ad", t["head_W"], glogits)
    if xout_grads is not None:
        gXout = gXout + np.asarray(xout_grads, dtype=np.float64)

    # gated representation: x_out = x_in * (1 + S), S = softmax(x_in @ Wa)
    gx_in = (gXout * (1.0 + S)).sum(axis=0)
    GS = gXout * x_in[None, :]
    GU = S * (GS - np.sum(S * GS, axis=1, keepdims=True))
    grads["attn_W"] += np.einsum("i,aj->aij", x_in, GU)
    gx_in += np.einsum("aij,aj->i", t["attn_W"], GU)

    # shared projection: x_in = tanh(proj_W doc + proj_b)
    gp = gx_in * (1.0 - x_in ** 2)
    doc = cache["doc"]
    grads["proj_W"] += np.outer(gp, doc)
    grads["proj_b"] += gp
    gdoc = t["proj_W"].T @ gp

    O, alpha = cache["O"], cache["alpha"]
    T = O.shape[0]
    if config.pooling == "attention":
        Aact = cache["Aact"]
        galpha = O @ gdoc
        gO = alpha[:, None] * gdoc[None, :]
        ge = alpha * (galpha - alpha @ galpha)
        GQ = (ge[:, None] * t["pool_v"][None, :]) * (1.0 - Aact ** 2)
        grads["pool_v"] += ge @ Aact
        grads["pool_W"] += GQ.T @ O
        grads["pool_b"] += GQ.sum(axis=0)
        gO = gO + GQ @ t["pool_W"]
    else:
        gO = np.tile(gdoc / T, (T, 1))

    H = config.hidden
    _gru_backward(t["gru_fw_W"], t["gru_fw_U"], t["gru_fw_Uc"], cache["gru_f"],
                  gO[:, :H], grads, "gru_fw")
    _gru_backward(t["gru_bw_W"], t["gru_bw_U"], t["gru_bw_Uc"], cache["gru_b"],
                  gO[::-1, H:], grads, "gru_bw")
    return grads


# ---------------------------------------------------------------------------
# Optimizer
# ---------------------------------------------------------------------------

@dataclass
class AdamState:
    """First/second moment accumulators plus the shared step counter."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0


def init_adam(params: ModelParams) -> AdamState:
    return AdamState(m={n: np.zeros_like(p) for n, p in params.tensors.items()},
                     v={n: np.zeros_like(p) for n, p in params.tensors.items()})


def adam_step(params: ModelParams, grads: Mapping[str, np.ndarray], state: AdamState,
              lr: float = 0.001, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> bool:
    """Apply one update in place. Returns False (and leaves params, moments and
    the step counter untouched) if any gradient entry is non-finite."""
    if set(grads) != set(params.tensors):
        raise ModelError("gradient keys do not match parameter keys")
    for name, g in grads.items():
        if not np.isfinite(g).all():
            logger.warning("skipping update: non-finite gradient in %s", name)
            return False
    state.t += 1
    t = state.t
    bc1 = 1.0 - beta1 ** t
    bc2 = 1.0 - beta2 ** t
    for name, p in params.tensors.items():
        g = grads[name]
        state.m[name] = beta1 * state.m[name] + (1.0 - beta1) * g
        state.v[name] = beta2 * state.v[name] + (1.0 - beta2) * (g * g)
        m_hat = state.m[name] / bc1
        v_hat = state.v[name] / bc2
        p -= lr * m_hat / (np.sqrt(v_hat) + eps)
    return True
