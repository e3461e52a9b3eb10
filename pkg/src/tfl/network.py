"""Seq2seq LSTM forecaster: forward pass and backpropagation through time.

Two architectures share one skeleton.  An encoder LSTM consumes the input
window from a zero initial state; the decoder LSTM starts from the
encoder's final (h, c) and receives that same final hidden state as its
input at every step (non-autoregressive).  A single affine output layer,
shared across decoder steps, maps each decoder hidden state (plain) or
the concatenation of attention context and decoder hidden state
(attention variant) to one scalar forecast per step.

Attention scores are unscaled dot products between decoder and encoder
hidden states, softmax-normalized over encoder positions.

All internals run batched, time-major (step, batch, width); the public
single-window operations wrap a batch of one so there is exactly one
numeric path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numeric import Rng, assert_finite, sigmoid, softmax

GATES = ("f", "i", "c", "o")


@dataclass
class ModelConfig:
    n_past: int = 12
    n_future: int = 6
    hidden: int = 100
    attention: bool = False

    def __post_init__(self):
        for name in ("n_past", "n_future", "hidden"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")


@dataclass
class LstmParams:
    """One LSTM's weights: per gate, W (hidden x (hidden + input)) and bias.

    The concatenated-input convention: gate preactivation is
    W @ [h_prev, x] + b.
    """

    wf: np.ndarray
    wi: np.ndarray
    wc: np.ndarray
    wo: np.ndarray
    bf: np.ndarray
    bi: np.ndarray
    bc: np.ndarray
    bo: np.ndarray

    def __post_init__(self):
        shapes_w = {self.wf.shape, self.wi.shape, self.wc.shape, self.wo.shape}
        shapes_b = {self.bf.shape, self.bi.shape, self.bc.shape, self.bo.shape}
        if len(shapes_w) != 1 or len(shapes_b) != 1:
            raise ValueError(f"gate shapes differ: weights {shapes_w}, biases {shapes_b}")
        h, cols = self.wf.shape
        if self.bf.shape != (h,) or cols <= h:
            raise ValueError(f"inconsistent LSTM shapes: W {self.wf.shape}, b {self.bf.shape}")

    @property
    def hidden(self) -> int:
        return self.wf.shape[0]

    @property
    def input_width(self) -> int:
        return self.wf.shape[1] - self.wf.shape[0]


@dataclass
class DenseParams:
    """Shared affine output layer: scalar = w . features + b."""

    w: np.ndarray  # (width,)
    b: np.ndarray  # (1,)


@dataclass
class LstmState:
    """Hidden and cell state after a step, with the gate activations that
    produced it (needed for backprop; None on fresh zero states)."""

    h: np.ndarray
    c: np.ndarray
    f: np.ndarray | None = None
    i: np.ndarray | None = None
    g: np.ndarray | None = None  # candidate values (tanh branch)
    o: np.ndarray | None = None

    @classmethod
    def zeros(cls, hidden: int) -> "LstmState":
        return cls(h=np.zeros(hidden), c=np.zeros(hidden))


@dataclass
class Seq2SeqModel:
    config: ModelConfig
    encoder: LstmParams
    decoder: LstmParams
    output: DenseParams


@dataclass
class EncoderOutput:
    """Final state plus the full hidden stack h_1..h_T (stack[T-1] is final.h)."""

    final: LstmState
    stack: np.ndarray  # (n_past, hidden)


@dataclass
class AttentionTrace:
    """Per-step attention rows (each a probability vector over encoder
    positions) and the context vectors they produced."""

    weights: np.ndarray   # (n_future, n_past)
    contexts: np.ndarray  # (n_future, hidden)


def output_width(config: ModelConfig) -> int:
    return 2 * config.hidden if config.attention else config.hidden


def param_items(model: Seq2SeqModel) -> list[tuple[str, np.ndarray]]:
    """Flat (name, array) view of every learnable block, fixed order."""
    items = []
    for prefix, lstm in (("enc", model.encoder), ("dec", model.decoder)):
        for g in GATES:
            items.append((f"{prefix}.w{g}", getattr(lstm, f"w{g}")))
        for g in GATES:
            items.append((f"{prefix}.b{g}", getattr(lstm, f"b{g}")))
    items.append(("out.w", model.output.w))
    items.append(("out.b", model.output.b))
    return items


def copy_model(model: Seq2SeqModel) -> Seq2SeqModel:
    def cp(lstm: LstmParams) -> LstmParams:
        return LstmParams(*(getattr(lstm, f"w{g}").copy() for g in GATES),
                          *(getattr(lstm, f"b{g}").copy() for g in GATES))

    return Seq2SeqModel(
        config=ModelConfig(**vars(model.config)),
        encoder=cp(model.encoder),
        decoder=cp(model.decoder),
        output=DenseParams(w=model.output.w.copy(), b=model.output.b.copy()),
    )


def param_count(model: Seq2SeqModel) -> int:
    return sum(arr.size for _, arr in param_items(model))


def _glorot(rows: int, cols: int, rng: Rng) -> np.ndarray:
    bound = np.sqrt(6.0 / (rows + cols))
    return rng.uniform_array(rows * cols, -bound, bound).reshape(rows, cols)


def _init_lstm(hidden: int, input_width: int, rng: Rng) -> LstmParams:
    weights = [_glorot(hidden, hidden + input_width, rng) for _ in GATES]
    biases = [np.zeros(hidden) for _ in GATES]
    return LstmParams(*weights, *biases)


def init(config: ModelConfig, rng: Rng) -> Seq2SeqModel:
    """Glorot-uniform weights, zero biases; draw order is fixed (encoder
    gates f,i,c,o row-major, then decoder, then output) so a seed pins the
    model bitwise."""
    encoder = _init_lstm(config.hidden, 1, rng)
    decoder = _init_lstm(config.hidden, config.hidden, rng)
    width = output_width(config)
    out_w = _glorot(1, width, rng).reshape(width)
    return Seq2SeqModel(
        config=config, encoder=encoder, decoder=decoder,
        output=DenseParams(w=out_w, b=np.zeros(1)),
    )


def init_output_layer(config: ModelConfig, rng: Rng) -> DenseParams:
    """Fresh output layer (used when re-targeting a trained model)."""
    width = output_width(config)
    return DenseParams(w=_glorot(1, width, rng).reshape(width), b=np.zeros(1))


def lstm_step(params: LstmParams, x: np.ndarray, prev: LstmState) -> LstmState:
    """Single cell update on vectors; returns the new state with cached gates."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if len(x) != params.input_width:
        raise ValueError(f"input width {len(x)} != expected {params.input_width}")
    if prev.h.shape != (params.hidden,) or prev.c.shape != (params.hidden,):
        raise ValueError(
            f"state shapes {prev.h.shape}/{prev.c.shape} != hidden {params.hidden}"
        )
    z = np.concatenate([prev.h, x])
    f = sigmoid(params.wf @ z + params.bf)
    i = sigmoid(params.wi @ z + params.bi)
    g = np.tanh(params.wc @ z + params.bc)
    o = sigmoid(params.wo @ z + params.bo)
    c = f * prev.c + i * g
    h = o * np.tanh(c)
    return LstmState(h=h, c=c, f=f, i=i, g=g, o=o)


@dataclass
class _SeqCache:
    """Everything the reversed pass needs from one LSTM run."""

    z: np.ndarray       # (T, B, hidden+input): concatenated [h_prev, x]
    f: np.ndarray
    i: np.ndarray
    g: np.ndarray
    o: np.ndarray
    c: np.ndarray
    tanh_c: np.ndarray
    h: np.ndarray       # (T, B, hidden)
    c0: np.ndarray      # (B, hidden)


def _run_lstm(params: LstmParams, xs: np.ndarray, h0: np.ndarray, c0: np.ndarray) -> _SeqCache:
    T, B, width = xs.shape
    hid = params.hidden
    shape = (T, B, hid)
    cache = _SeqCache(
        z=np.empty((T, B, hid + width)), f=np.empty(shape), i=np.empty(shape),
        g=np.empty(shape), o=np.empty(shape), c=np.empty(shape),
        tanh_c=np.empty(shape), h=np.empty(shape), c0=c0,
    )
    h, c = h0, c0
    for t in range(T):
        z = np.concatenate([h, xs[t]], axis=1)
        f = sigmoid(z @ params.wf.T + params.bf)
        i = sigmoid(z @ params.wi.T + params.bi)
        g = np.tanh(z @ params.wc.T + params.bc)
        o = sigmoid(z @ params.wo.T + params.bo)
        c = f * c + i * g
        tc = np.tanh(c)
        h = o * tc
        cache.z[t], cache.f[t], cache.i[t], cache.g[t], cache.o[t] = z, f, i, g, o
        cache.c[t], cache.tanh_c[t], cache.h[t] = c, tc, h
    return cache


def _lstm_backward(
    params: LstmParams,
    cache: _SeqCache,
    dh_seq: np.ndarray,
    dh_final: np.ndarray,
    dc_final: np.ndarray,
) -> tuple[dict[str, np.ndarray], np.ndarray, np.ndarray, np.ndarray]:
    """Reverse the recurrence.

    dh_seq carries external gradients on each h_t; dh_final/dc_final are
    extra gradients on the last state.  Returns per-gate weight grads, the
    gradient on the input sequence, and gradients on the initial state.
    """
    T, B, _ = dh_seq.shape
    hid = params.hidden
    grads = {f"w{g}": np.zeros_like(getattr(params, f"w{g}")) for g in GATES}
    grads.update({f"b{g}": np.zeros_like(getattr(params, f"b{g}")) for g in GATES})
    dx = np.empty((T, B, params.input_width))
    dh_carry = dh_final.copy()
    dc_carry = dc_final.copy()
    for t in reversed(range(T)):
        dh = dh_seq[t] + dh_carry
        do = dh * cache.tanh_c[t]
        dc = dh * cache.o[t] * (1.0 - cache.tanh_c[t] ** 2) + dc_carry
        c_prev = cache.c[t - 1] if t > 0 else cache.c0
        df = dc * c_prev
        di = dc * cache.g[t]
        dg = dc * cache.i[t]
        dc_carry = dc * cache.f[t]
        dzf = df * cache.f[t] * (1.0 - cache.f[t])
        dzi = di * cache.i[t] * (1.0 - cache.i[t])
        dzg = dg * (1.0 - cache.g[t] ** 2)
        dzo = do * cache.o[t] * (1.0 - cache.o[t])
        z = cache.z[t]
        grads["wf"] += dzf.T @ z
        grads["wi"] += dzi.T @ z
        grads["wc"] += dzg.T @ z
        grads["wo"] += dzo.T @ z
        grads["bf"] += dzf.sum(axis=0)
        grads["bi"] += dzi.sum(axis=0)
        grads["bc"] += dzg.sum(axis=0)
        grads["bo"] += dzo.sum(axis=0)
        dz = dzf @ params.wf + dzi @ params.wi + dzg @ params.wc + dzo @ params.wo
        dh_carry = dz[:, :hid]
        dx[t] = dz[:, hid:]
    return grads, dx, dh_carry, dc_carry


@dataclass
class ForwardCache:
    """Batched forward activations kept for backprop."""

    inputs: np.ndarray        # (B, n_past)
    enc: _SeqCache
    dec: _SeqCache
    preds: np.ndarray         # (B, n_future)
    attn: np.ndarray | None   # (n_future, B, n_past)
    ctx: np.ndarray | None    # (n_future, B, hidden)


def forward_batch(model: Seq2SeqModel, inputs: np.ndarray) -> ForwardCache:
    """Run encoder + decoder + output layer over a batch of windows."""
    cfg = model.config
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 2 or inputs.shape[1] != cfg.n_past:
        raise ValueError(f"expected inputs (batch, {cfg.n_past}), got {inputs.shape}")
    B = inputs.shape[0]
    hid = cfg.hidden
    xs_enc = inputs.T[:, :, None]  # (T, B, 1)
    enc = _run_lstm(model.encoder, xs_enc, np.zeros((B, hid)), np.zeros((B, hid)))
    h_final, c_final = enc.h[-1], enc.c[-1]
    xs_dec = np.broadcast_to(h_final, (cfg.n_future, B, hid))
    dec = _run_lstm(model.decoder, xs_dec, h_final, c_final)
    if cfg.attention:
        scores = np.einsum("sbh,tbh->sbt", dec.h, enc.h)
        attn = softmax(scores, axis=-1)
        ctx = np.einsum("sbt,tbh->sbh", attn, enc.h)
        feats = np.concatenate([ctx, dec.h], axis=2)
    else:
        attn = ctx = None
        feats = dec.h
    preds = (feats @ model.output.w).T + model.output.b[0]  # (B, n_future)
    assert_finite(preds, "forward predictions")
    return ForwardCache(inputs=inputs, enc=enc, dec=dec, preds=preds, attn=attn, ctx=ctx)


def backward_batch(model: Seq2SeqModel, cache: ForwardCache, dpreds: np.ndarray) -> dict[str, np.ndarray]:
    """Exact gradients of the (summed) loss wrt every parameter.

    dpreds is dLoss/dpredictions, shape (batch, n_future).  Gradients flow
    through the attention path and through both the decoder's repeated
    input and its initial state back into the encoder.
    """
    cfg = model.config
    if not isinstance(cache, ForwardCache):
        raise ValueError("backward requires the ForwardCache from forward_batch")
    dpreds = np.asarray(dpreds, dtype=np.float64)
    if dpreds.shape != cache.preds.shape:
        raise ValueError(f"loss gradient shape {dpreds.shape} != predictions {cache.preds.shape}")
    hid = cfg.hidden
    B = dpreds.shape[0]
    dy = dpreds.T  # (n_future, B)

    if cfg.attention:
        feats = np.concatenate([cache.ctx, cache.dec.h], axis=2)
    else:
        feats = cache.dec.h
    dout_w = np.einsum("sb,sbk->k", dy, feats)
    dout_b = np.array([dy.sum()])
    dfeats = dy[:, :, None] * model.output.w  # (n_future, B, width)

    denc_seq = np.zeros((cfg.n_past, B, hid))
    if cfg.attention:
        dctx = dfeats[:, :, :hid]
        ddec_seq = dfeats[:, :, hid:].copy()
        attn, enc_h, dec_h = cache.attn, cache.enc.h, cache.dec.h
        dattn = np.einsum("sbh,tbh->sbt", dctx, enc_h)
        denc_seq += np.einsum("sbt,sbh->tbh", attn, dctx)
        dscores = attn * (dattn - np.sum(attn * dattn, axis=-1, keepdims=True))
        ddec_seq += np.einsum("sbt,tbh->sbh", dscores, enc_h)
        denc_seq += np.einsum("sbt,sbh->tbh", dscores, dec_h)
    else:
        ddec_seq = dfeats.copy()

    zero = np.zeros((B, hid))
    dec_grads, dx_dec, ddec_h0, ddec_c0 = _lstm_backward(
        model.decoder, cache.dec, ddec_seq, zero, zero
    )
    # decoder consumed h_final both as repeated input and as initial hidden state
    dh_final = dx_dec.sum(axis=0) + ddec_h0
    dc_final = ddec_c0
    enc_grads, _, _, _ = _lstm_backward(model.encoder, cache.enc, denc_seq, dh_final, dc_final)

    grads = {f"enc.{k}": v for k, v in enc_grads.items()}
    grads.update({f"dec.{k}": v for k, v in dec_grads.items()})
    grads["out.w"] = dout_w
    grads["out.b"] = dout_b
    return grads


def encode(model: Seq2SeqModel, window: np.ndarray) -> EncoderOutput:
    """Run the encoder over one window from the zero initial state."""
    window = np.asarray(window, dtype=np.float64).reshape(-1)
    if len(window) != model.config.n_past:
        raise ValueError(f"window length {len(window)} != n_past {model.config.n_past}")
    cache = _run_lstm(
        model.encoder,
        window[:, None, None],
        np.zeros((1, model.config.hidden)),
        np.zeros((1, model.config.hidden)),
    )
    final = LstmState(
        h=cache.h[-1, 0].copy(), c=cache.c[-1, 0].copy(),
        f=cache.f[-1, 0], i=cache.i[-1, 0], g=cache.g[-1, 0], o=cache.o[-1, 0],
    )
    return EncoderOutput(final=final, stack=cache.h[:, 0, :].copy())


def _decode(model: Seq2SeqModel, enc: EncoderOutput) -> _SeqCache:
    cfg = model.config
    h_final = enc.final.h[None, :]
    c_final = enc.final.c[None, :]
    xs_dec = np.broadcast_to(h_final, (cfg.n_future, 1, cfg.hidden))
    return _run_lstm(model.decoder, xs_dec, h_final, c_final)


def decode_plain(model: Seq2SeqModel, enc: EncoderOutput) -> np.ndarray:
    """Forecast from the encoder summary; the shared affine layer maps each
    decoder hidden state to one scalar."""
    if model.config.attention:
        raise ValueError("decode_plain called on an attention model")
    dec = _decode(model, enc)
    return dec.h[:, 0, :] @ model.output.w + model.output.b[0]


def decode_attention(model: Seq2SeqModel, enc: EncoderOutput) -> tuple[np.ndarray, AttentionTrace]:
    """Forecast with dot-product attention over the encoder hidden stack."""
    if not model.config.attention:
        raise ValueError("decode_attention called on a model without attention")
    dec = _decode(model, enc)
    dec_h = dec.h[:, 0, :]                      # (n_future, hidden)
    scores = dec_h @ enc.stack.T                # (n_future, n_past)
    weights = softmax(scores, axis=-1)
    contexts = weights @ enc.stack              # (n_future, hidden)
    feats = np.concatenate([contexts, dec_h], axis=1)
    preds = feats @ model.output.w + model.output.b[0]
    return preds, AttentionTrace(weights=weights, contexts=contexts)


def forward(model: Seq2SeqModel, window: np.ndarray) -> np.ndarray:
    """Predictions for a single window (either architecture)."""
    window = np.asarray(window, dtype=np.float64).reshape(-1)
    return forward_batch(model, window[None, :]).preds[0]


def backward(model: Seq2SeqModel, window: np.ndarray, loss_grad: np.ndarray) -> dict[str, np.ndarray]:
    """Single-window gradients given dLoss/dpredictions."""
    window = np.asarray(window, dtype=np.float64).reshape(-1)
    loss_grad = np.asarray(loss_grad, dtype=np.float64).reshape(-1)
    if len(loss_grad) != model.config.n_future:
        raise ValueError(
            f"loss gradient length {len(loss_grad)} != n_future {model.config.n_future}"
        )
    cache = forward_batch(model, window[None, :])
    return backward_batch(model, cache, loss_grad[None, :])


def predict_batch(model: Seq2SeqModel, inputs: np.ndarray, chunk: int = 512) -> np.ndarray:
    """Predictions for many windows, chunked to bound memory."""
    inputs = np.asarray(inputs, dtype=np.float64)
    parts = [
        forward_batch(model, inputs[k : k + chunk]).preds
        for k in range(0, len(inputs), chunk)
    ]
    return np.concatenate(parts) if parts else np.empty((0, model.config.n_future))
