"""Scale-expert adapter kernels and depth-feature fusion.

Row convention throughout: a feature batch is (n, d) and a weight W acts as
X @ W.T. The adapted projection is

    h = W0 x + sum_i (alpha_i * lam_i) * B_i (A_i x)

with per-expert low-rank factors A_i (r x d, down) and B_i (d x r, up) and
mixture weights lam from the router. The fusion block runs single-head
scaled-dot-product cross attention with the visual features as queries and
the depth features as keys/values; by default layers chain without internal
residuals and the visual input is added back once at the end.

Analytic gradients are provided for every block so the self-check command
can compare them against central finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class FusionError(ValueError):
    pass


class IndivisibleT(FusionError):
    pass


# ---------------------------------------------------------------- MLP + router


@dataclass
class Mlp2:
    """Two-layer perceptron with ReLU hidden activation."""

    w1: np.ndarray  # (hidden, d_in)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (d_out, hidden)
    b2: np.ndarray  # (d_out,)

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        z = x @ self.w1.T + self.b1
        return np.maximum(z, 0.0) @ self.w2.T + self.b2


def mlp2_grad(x: np.ndarray, mlp: Mlp2, upstream: np.ndarray):
    """Gradients of L = <upstream, mlp(x)> wrt (x, w1, b1, w2, b2)."""
    x = np.asarray(x, dtype=float)
    z = x @ mlp.w1.T + mlp.b1
    h = np.maximum(z, 0.0)
    c = np.asarray(upstream, dtype=float)
    dw2 = c.T @ h
    db2 = c.sum(axis=0)
    dh = c @ mlp.w2
    dz = dh * (z > 0)
    dw1 = dz.T @ x
    db1 = dz.sum(axis=0)
    dx = dz @ mlp.w1
    return dx, dw1, db1, dw2, db2


def softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    z = logits - logits.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def router_weights(x: np.ndarray, router: Mlp2) -> np.ndarray:
    """Softmax expert weights for feature rows x (n, d) -> (n, M).

    A router whose final layer is zero-initialized emits uniform weights.
    """
    return softmax(router.apply(np.asarray(x, dtype=float)), axis=-1)


# ------------------------------------------------------------------- experts


@dataclass
class LoraExpert:
    down: np.ndarray  # A: (r, d)
    up: np.ndarray    # B: (d, r)
    alpha: float = 1.0


@dataclass
class ExpertStack:
    w0: np.ndarray                  # frozen base projection (d, d)
    experts: list[LoraExpert]
    router: Mlp2 | None = None


def expert_forward(x: np.ndarray, stack: ExpertStack, lam: np.ndarray) -> np.ndarray:
    """Fused adapter projection h = W0 x + sum_i alpha_i lam_i B_i A_i x.

    lam has one weight per expert. Experts with lam_i == 0 are skipped, so a
    one-hot lam reproduces the single-expert output bit for bit. Never
    materializes the dense collapsed matrix.
    """
    x = np.asarray(x, dtype=float)
    if len(lam) != len(stack.experts):
        raise FusionError(f"{len(lam)} weights for {len(stack.experts)} experts")
    h = x @ stack.w0.T
    for li, ex in zip(lam, stack.experts):
        s = float(li) * ex.alpha
        if s == 0.0:
            continue
        h = h + s * ((x @ ex.down.T) @ ex.up.T)
    return h


def expert_forward_grad(x: np.ndarray, stack: ExpertStack, lam: np.ndarray, upstream: np.ndarray):
    """Gradients of L = <upstream, expert_forward(x)> wrt x, lam, W0, A_i, B_i."""
    x = np.asarray(x, dtype=float)
    c = np.asarray(upstream, dtype=float)
    dx = c @ stack.w0
    dw0 = c.T @ x
    dlam = np.zeros(len(stack.experts))
    dA, dB = [], []
    for i, ex in enumerate(stack.experts):
        s = float(lam[i]) * ex.alpha
        xa = x @ ex.down.T           # (n, r)
        cb = c @ ex.up               # (n, r)
        dlam[i] = ex.alpha * float((cb * xa).sum())
        dA.append(s * (cb.T @ x))
        dB.append(s * (c.T @ xa))
        dx = dx + s * (cb @ ex.down)
    return dx, dlam, dw0, dA, dB


# ------------------------------------------------------------------- pooling


def temporal_pool(features: np.ndarray, tau: int) -> np.ndarray:
    """Mean over consecutive blocks of tau frames: (T, d) -> (T / tau, d)."""
    f = np.asarray(features, dtype=float)
    if tau <= 0:
        raise FusionError("tau must be positive")
    if f.shape[0] % tau != 0:
        raise IndivisibleT(f"T = {f.shape[0]} not divisible by tau = {tau}")
    return f.reshape(f.shape[0] // tau, tau, *f.shape[1:]).mean(axis=1)


def channel_map(features: np.ndarray, mlp: Mlp2) -> np.ndarray:
    """Row-wise two-layer perceptron mapping depth channels to visual width."""
    return mlp.apply(features)


channel_map_grad = mlp2_grad


# ----------------------------------------------------------- cross attention


@dataclass
class AttnLayer:
    wq: np.ndarray
    wk: np.ndarray
    wv: np.ndarray
    wo: np.ndarray


@dataclass
class FusionParams:
    layers: list[AttnLayer]
    residual_per_layer: bool = False  # default: one residual add at the end


def _attn_forward(x, f_d, layer: AttnLayer):
    d = x.shape[1]
    sc = 1.0 / np.sqrt(d)
    q = x @ layer.wq.T
    k = f_d @ layer.wk.T
    v = f_d @ layer.wv.T
    p = softmax(q @ k.T * sc, axis=-1)
    o = p @ v
    y = o @ layer.wo.T
    return y, (x, q, k, v, p, o)


def cross_attention_fuse(f_v: np.ndarray, f_d: np.ndarray, params: FusionParams,
                         return_attn: bool = False):
    """Fuse depth features into visual features via cross attention.

    f_v (n_v, d) are queries, f_d (n_d, d) keys and values. Returns the fused
    features, plus the per-layer attention matrices when return_attn is set.
    """
    f_v = np.asarray(f_v, dtype=float)
    f_d = np.asarray(f_d, dtype=float)
    if f_v.ndim != 2 or f_d.ndim != 2 or f_v.shape[1] != f_d.shape[1]:
        raise FusionError(f"feature shapes {f_v.shape} and {f_d.shape} do not align")
    x = f_v
    attn = []
    for layer in params.layers:
        y, cache = _attn_forward(x, f_d, layer)
        attn.append(cache[4])
        x = x + y if params.residual_per_layer else y
    out = x if params.residual_per_layer else x + f_v
    if return_attn:
        return out, attn
    return out


def cross_attention_grads(f_v, f_d, params: FusionParams, upstream):
    """Gradients of L = <upstream, cross_attention_fuse(f_v, f_d)>.

    Returns (d_f_v, d_f_d, layer_grads) where layer_grads[i] is a dict with
    wq/wk/wv/wo gradients for layer i.
    """
    f_v = np.asarray(f_v, dtype=float)
    f_d = np.asarray(f_d, dtype=float)
    caches = []
    x = f_v
    for layer in params.layers:
        y, cache = _attn_forward(x, f_d, layer)
        caches.append(cache)
        x = x + y if params.residual_per_layer else y

    c = np.asarray(upstream, dtype=float)
    d_x = c.copy()
    d_f_v = c.copy() if not params.residual_per_layer else np.zeros_like(f_v)
    d_f_d = np.zeros_like(f_d)
    layer_grads: list[dict] = [None] * len(params.layers)

    d = f_v.shape[1]
    sc = 1.0 / np.sqrt(d)
    for idx in range(len(params.layers) - 1, -1, -1):
        layer = params.layers[idx]
        x_in, q, k, v, p, o = caches[idx]
        dy = d_x  # gradient wrt this layer's output y
        dwo = dy.T @ o
        do = dy @ layer.wo
        dp = do @ v.T
        dv = p.T @ do
        ds = p * (dp - (dp * p).sum(axis=1, keepdims=True))
        dq = ds @ k * sc
        dk = ds.T @ q * sc
        dwq = dq.T @ x_in
        dwk = dk.T @ f_d
        dwv = dv.T @ f_d
        d_f_d += dk @ layer.wk + dv @ layer.wv
        d_x_in = dq @ layer.wq
        layer_grads[idx] = {"wq": dwq, "wk": dwk, "wv": dwv, "wo": dwo}
        if params.residual_per_layer:
            d_x = d_x + d_x_in  # residual: dL/dx_in = dL/dx_out + query path
        else:
            d_x = d_x_in
    if params.residual_per_layer:
        d_f_v = d_x
    else:
        d_f_v = d_f_v + d_x
    return d_f_v, d_f_d, layer_grads


# ------------------------------------------------------------ initializers


def init_mlp2(d_in: int, hidden: int, d_out: int, rng: np.random.Generator,
              scale: float = 0.2, zero_last: bool = False) -> Mlp2:
    w1 = scale * rng.standard_normal((hidden, d_in))
    b1 = scale * rng.standard_normal(hidden)
    if zero_last:
        return Mlp2(w1, b1, np.zeros((d_out, hidden)), np.zeros(d_out))
    return Mlp2(w1, b1, scale * rng.standard_normal((d_out, hidden)),
                scale * rng.standard_normal(d_out))


def init_expert_stack(d: int, ranks: list[int], rng: np.random.Generator,
                      alphas: list[float] | None = None, router_hidden: int = 8,
                      zero_router: bool = True) -> ExpertStack:
    experts = []
    for i, r in enumerate(ranks):
        experts.append(LoraExpert(
            down=rng.standard_normal((r, d)) / np.sqrt(d),
            up=rng.standard_normal((d, r)) / np.sqrt(r),
            alpha=1.0 if alphas is None else float(alphas[i]),
        ))
    router = init_mlp2(d, router_hidden, len(ranks), rng, zero_last=zero_router)
    return ExpertStack(w0=rng.standard_normal((d, d)) / np.sqrt(d), experts=experts, router=router)


def init_fusion(d: int, n_layers: int, rng: np.random.Generator,
                residual_per_layer: bool = False, zero_value: bool = False) -> FusionParams:
    layers = []
    for _ in range(n_layers):
        layers.append(AttnLayer(
            wq=rng.standard_normal((d, d)) / np.sqrt(d),
            wk=rng.standard_normal((d, d)) / np.sqrt(d),
            wv=np.zeros((d, d)) if zero_value else rng.standard_normal((d, d)) / np.sqrt(d),
            wo=rng.standard_normal((d, d)) / np.sqrt(d),
        ))
    return FusionParams(layers=layers, residual_per_layer=residual_per_layer)


# ------------------------------------------------------------- self checks


def _fd_grad(f, x: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """Central finite differences of scalar f at array x."""
    g = np.zeros_like(x, dtype=float)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        fp = f()
        flat[i] = orig - step
        fm = f()
        flat[i] = orig
        gf[i] = (fp - fm) / (2.0 * step)
    return g


def _rel_err(a: np.ndarray, b: np.ndarray) -> float:
    denom = max(float(np.abs(b).max(initial=0.0)), 1e-8)
    return float(np.abs(a - b).max(initial=0.0)) / denom


def run_fusion_checks(d: int = 8, n_experts: int = 3, seed: int = 0,
                      perturb: bool = False) -> dict:
    """Equivalence and gradient self-checks for every fusion block.

    Returns a dict of named maximum errors; callers compare against the
    tolerances (1e-10 for algebraic equivalence, 1e-4 for gradient checks).
    `perturb` deliberately corrupts one analytic gradient so the failure path
    of the checker itself can be exercised.
    """
    rng = np.random.default_rng(seed)
    report: dict[str, float] = {}
    n = 5

    # expert kernel vs dense collapse (check-only materialization)
    ranks = [2 + (i % 2) * 2 for i in range(n_experts)]
    stack = init_expert_stack(d, ranks, rng)
    x = rng.standard_normal((n, d))
    lam = softmax(rng.standard_normal(n_experts))
    dense = stack.w0.copy()
    for li, ex in zip(lam, stack.experts):
        dense = dense + float(li) * ex.alpha * (ex.up @ ex.down)
    report["expert_dense_oracle"] = float(np.abs(expert_forward(x, stack, lam) - x @ dense.T).max())

    one_hot = np.zeros(n_experts)
    one_hot[1] = 1.0
    single = ExpertStack(w0=stack.w0, experts=[stack.experts[1]], router=None)
    exact = expert_forward(x, stack, one_hot) == expert_forward(x, single, np.array([1.0]))
    report["expert_one_hot_exact"] = 0.0 if bool(np.all(exact)) else 1.0

    # router rows sum to one
    w = router_weights(x, stack.router)
    report["router_row_sum"] = float(np.abs(w.sum(axis=1) - 1.0).max())

    # expert gradient vs finite differences
    c = rng.standard_normal((n, d))
    dx, dlam, dw0, dA, dB = expert_forward_grad(x, stack, lam, c)
    if perturb:
        dx = dx + 1.0
    loss = lambda: float((expert_forward(x, stack, lam) * c).sum())
    report["expert_grad_x"] = _rel_err(dx, _fd_grad(loss, x))
    report["expert_grad_lam"] = _rel_err(dlam, _fd_grad(loss, lam))
    report["expert_grad_w0"] = _rel_err(dw0, _fd_grad(loss, stack.w0))
    report["expert_grad_A0"] = _rel_err(dA[0], _fd_grad(loss, stack.experts[0].down))
    report["expert_grad_B0"] = _rel_err(dB[0], _fd_grad(loss, stack.experts[0].up))

    # channel map: gradient + identity slice
    hidden = 2 * d
    mlp = init_mlp2(d, hidden, d, rng)
    # redraw until every preactivation clears the ReLU kink by more than the
    # finite-difference step can move it
    f = rng.standard_normal((n, d))
    while np.abs(f @ mlp.w1.T + mlp.b1).min() < 1e-3:
        f = rng.standard_normal((n, d))
    cm_loss = lambda: float((channel_map(f, mlp) * c).sum())
    df, dw1, db1, dw2, db2 = channel_map_grad(f, mlp, c)
    report["channel_map_grad_x"] = _rel_err(df, _fd_grad(cm_loss, f))
    report["channel_map_grad_w1"] = _rel_err(dw1, _fd_grad(cm_loss, mlp.w1))
    report["channel_map_grad_b1"] = _rel_err(db1, _fd_grad(cm_loss, mlp.b1))
    report["channel_map_grad_w2"] = _rel_err(dw2, _fd_grad(cm_loss, mlp.w2))
    report["channel_map_grad_b2"] = _rel_err(db2, _fd_grad(cm_loss, mlp.b2))

    ident = Mlp2(np.eye(d), np.zeros(d), np.eye(d), np.zeros(d))
    pos = np.abs(rng.standard_normal((n, d)))
    report["channel_map_identity_slice"] = float(np.abs(channel_map(pos, ident) - pos).max())

    # temporal pooling vs plain mean
    feats = rng.standard_normal((12, d))
    report["temporal_pool_mean"] = float(
        np.abs(temporal_pool(feats, 4) - feats.reshape(3, 4, d).mean(axis=1)).max()
    )

    # cross attention: zero value projection passthrough (bit exact)
    f_v = rng.standard_normal((n, d))
    f_d = rng.standard_normal((n + 2, d))
    zv = init_fusion(d, 2, rng, zero_value=True)
    report["attn_zero_value_passthrough"] = (
        0.0 if bool(np.all(cross_attention_fuse(f_v, f_d, zv) == f_v)) else 1.0
    )

    # single key -> attention weight exactly one
    fp1 = init_fusion(d, 1, rng)
    _, attn = cross_attention_fuse(f_v, f_d[:1], fp1, return_attn=True)
    report["attn_single_key_weight"] = float(np.abs(attn[0] - 1.0).max())

    # attention rows sum to one
    fp = init_fusion(d, 2, rng)
    _, attn = cross_attention_fuse(f_v, f_d, fp, return_attn=True)
    report["attn_row_sum"] = float(max(np.abs(p.sum(axis=1) - 1.0).max() for p in attn))

    # permutation of key/value rows leaves the output unchanged
    perm = rng.permutation(f_d.shape[0])
    report["attn_kv_permutation"] = float(
        np.abs(cross_attention_fuse(f_v, f_d, fp) - cross_attention_fuse(f_v, f_d[perm], fp)).max()
    )

    # full-block gradients, both residual wirings
    for tag, wiring in (("chain", fp), ("residual", init_fusion(d, 2, rng, residual_per_layer=True))):
        cv = rng.standard_normal(f_v.shape)
        at_loss = lambda: float((cross_attention_fuse(f_v, f_d, wiring) * cv).sum())
        gv, gd, lg = cross_attention_grads(f_v, f_d, wiring, cv)
        report[f"attn_{tag}_grad_fv"] = _rel_err(gv, _fd_grad(at_loss, f_v))
        report[f"attn_{tag}_grad_fd"] = _rel_err(gd, _fd_grad(at_loss, f_d))
        report[f"attn_{tag}_grad_wq0"] = _rel_err(lg[0]["wq"], _fd_grad(at_loss, wiring.layers[0].wq))
        report[f"attn_{tag}_grad_wk0"] = _rel_err(lg[0]["wk"], _fd_grad(at_loss, wiring.layers[0].wk))
        report[f"attn_{tag}_grad_wv1"] = _rel_err(lg[1]["wv"], _fd_grad(at_loss, wiring.layers[1].wv))
        report[f"attn_{tag}_grad_wo1"] = _rel_err(lg[1]["wo"], _fd_grad(at_loss, wiring.layers[1].wo))
    return report


EQUIVALENCE_TOL = 1e-10
GRAD_TOL = 1e-4

# checks named here are algebraic identities; everything else is a gradient check
_EQUIVALENCE_KEYS = {
    "expert_dense_oracle", "expert_one_hot_exact", "router_row_sum",
    "channel_map_identity_slice", "temporal_pool_mean",
    "attn_zero_value_passthrough", "attn_single_key_weight", "attn_row_sum",
    "attn_kv_permutation",
}


def checks_pass(report: dict) -> bool:
    for key, value in report.items():
        tol = EQUIVALENCE_TOL if key in _EQUIVALENCE_KEYS else GRAD_TOL
        if key == "router_row_sum" or key == "attn_row_sum":
            tol = 1e-12
        if not value <= tol:
            return False
    return True
