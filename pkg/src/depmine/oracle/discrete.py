"""Enumerable discrete latent-variable models and exact information measures.

Joint tables p(z, x_1..x_L) are stored densely (axis 0 is the latent), so
entropies, conditional MIs, and the plug-in estimator can all be computed
by exhaustive summation. TableModel adapts a joint over the observed
coordinates to the masked-conditional interface the Gibbs estimator uses,
providing exact conditionals for estimator verification.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from ..rng import Stream
from .report import PropReport

_CAPS = {"n_z": 4, "length": 4, "vocab": 5}
_NORM_TOL = 1e-12


@dataclass(frozen=True)
class DiscreteLatentModel:
    """Fully enumerated joint p(z, x_1..x_L)."""

    table: np.ndarray

    def __post_init__(self):
        t = self.table
        if t.ndim < 3:
            raise ConfigError("joint table needs a z axis and at least two x axes")
        if t.shape[0] > _CAPS["n_z"] or t.ndim - 1 > _CAPS["length"]:
            raise ConfigError("table exceeds the declared latent/length caps")
        if any(s != t.shape[1] or s > _CAPS["vocab"] for s in t.shape[1:]):
            raise ConfigError("x axes must share one vocab of size <= 5")
        if (t < 0).any():
            raise ConfigError("joint table entries must be non-negative")
        if abs(float(t.sum()) - 1.0) > _NORM_TOL:
            raise ConfigError(f"joint table mass {float(t.sum())} != 1")

    @property
    def n_z(self):
        return self.table.shape[0]

    @property
    def length(self):
        return self.table.ndim - 1

    @property
    def vocab(self):
        return self.table.shape[1]

    def joint_x(self) -> np.ndarray:
        return self.table.sum(axis=0)


def discrete_gen(n_z, length, vocab, seed, concentration=1.0) -> DiscreteLatentModel:
    """Dirichlet-flat random joint table (strictly positive entries)."""
    stream = Stream.from_seed(seed, "discrete-model")
    shape = (n_z,) + (vocab,) * length
    raw = stream.gen.gamma(concentration, size=shape)
    table = raw / raw.sum()
    # renormalize exactly enough for the construction-time mass check
    table = table / table.sum()
    return DiscreteLatentModel(table=table)


def mix_with_uniform(model: DiscreteLatentModel, alpha: float) -> DiscreteLatentModel:
    if not (0.0 <= alpha <= 1.0):
        raise ConfigError("mixing weight must lie in [0, 1]")
    t = model.table
    mixed = (1.0 - alpha) * t + alpha / t.size
    return DiscreteLatentModel(table=mixed / mixed.sum())


# ---------------------------------------------------------------------------
# Exact information measures by enumeration


def entropy_nats(p) -> float:
    p = np.asarray(p, dtype=float).reshape(-1)
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())


def _marginal_entropy(table, axes) -> float:
    axes = tuple(sorted(axes))
    drop = tuple(a for a in range(table.ndim) if a not in axes)
    return entropy_nats(table.sum(axis=drop) if drop else table)


def cond_mutual_info(table, axes_a, axes_b, axes_c=()) -> float:
    """I(A; B | C) over an arbitrary joint table, in nats."""
    a, b, c = set(axes_a), set(axes_b), set(axes_c)
    if a & b or a & c or b & c:
        raise ConfigError("axis groups must be disjoint")
    h_ac = _marginal_entropy(table, a | c)
    h_bc = _marginal_entropy(table, b | c)
    h_c = _marginal_entropy(table, c) if c else 0.0
    h_abc = _marginal_entropy(table, a | b | c)
    return h_ac + h_bc - h_c - h_abc


def cond_entropy(table, axes_a, axes_c=()) -> float:
    """H(A | C) over an arbitrary joint table, in nats."""
    a, c = set(axes_a), set(axes_c)
    if a & c:
        raise ConfigError("axis groups must be disjoint")
    h_ac = _marginal_entropy(table, a | c)
    h_c = _marginal_entropy(table, c) if c else 0.0
    return h_ac - h_c


def discrete_exact(model: DiscreteLatentModel, i: int = 0, j: int = 1):
    """Exact I(x_i;x_j|ctx), I(x_i;x_j|Z,ctx), and H(Z|ctx) for one pair.

    ctx denotes all observed coordinates other than i and j.
    """
    if i == j or not (0 <= i < model.length and 0 <= j < model.length):
        raise ConfigError(f"invalid pair ({i}, {j}) for length {model.length}")
    ai, aj = i + 1, j + 1
    ctx = tuple(ax for ax in range(1, model.length + 1) if ax not in (ai, aj))
    full = model.table
    return {
        "cmi": cond_mutual_info(full, {ai}, {aj}, set(ctx)),
        "cmi_given_z": cond_mutual_info(full, {ai}, {aj}, set(ctx) | {0}),
        "h_z_given_ctx": cond_entropy(full, {0}, set(ctx)),
    }


def prop3_check(model: DiscreteLatentModel, i: int = 0, j: int = 1) -> PropReport:
    """Latent-confound gap: the conditional-MI excess over the latent-aware
    version is at most twice the latent's conditional entropy."""
    q = discrete_exact(model, i, j)
    return PropReport(
        name="prop3",
        lhs=q["cmi"] - q["cmi_given_z"],
        rhs=2.0 * q["h_z_given_ctx"],
        meta={"i": i, "j": j},
    )


# ---------------------------------------------------------------------------
# Exact plug-in estimator and its KL bound


def estimator_exact(p_x, q_x, i: int, j: int):
    """Exact (I_p, I_hat_q, expected KL) for pair (i, j), averaged over contexts.

    I_hat_q plugs q's conditionals of x_i into the conditional-MI formula
    while all expectations (outer joint, inner marginal over x_j, context
    weights) come from p. A q-zero where p has mass yields infinities.
    """
    p_x = np.asarray(p_x, dtype=float)
    q_x = np.asarray(q_x, dtype=float)
    if p_x.shape != q_x.shape:
        raise ConfigError("p and q must share one support")
    nd = p_x.ndim
    if i == j or not (0 <= i < nd and 0 <= j < nd):
        raise ConfigError(f"invalid pair ({i}, {j})")
    vi, vj = p_x.shape[i], p_x.shape[j]
    pm = np.moveaxis(p_x, (i, j), (0, 1)).reshape(vi, vj, -1)
    qm = np.moveaxis(q_x, (i, j), (0, 1)).reshape(vi, vj, -1)

    i_p = 0.0
    i_hat = 0.0
    e_kl = 0.0
    for c in range(pm.shape[2]):
        w = float(pm[:, :, c].sum())
        if w <= 0.0:
            continue
        pj = pm[:, :, c] / w  # joint of (x_i, x_j) given this context
        pi_m = pj.sum(axis=1)
        pj_m = pj.sum(axis=0)
        q_slice = qm[:, :, c]
        q_cond = np.zeros_like(q_slice)
        q_col = q_slice.sum(axis=0)
        ok = q_col > 0
        q_cond[:, ok] = q_slice[:, ok] / q_col[ok]

        ctx_ip = 0.0
        ctx_term1 = 0.0
        for b in range(vj):
            if pj_m[b] <= 0.0:
                continue
            for a in range(vi):
                mass = pj[a, b]
                if mass <= 0.0:
                    continue
                ctx_ip += mass * np.log(mass / (pi_m[a] * pj_m[b]))
                if q_cond[a, b] <= 0.0:
                    return float(i_p + w * ctx_ip), -np.inf, np.inf
                ctx_term1 += mass * np.log(q_cond[a, b])
        mix = q_cond @ pj_m  # inner expectation over p's x_j marginal
        ctx_term2 = 0.0
        for a in range(vi):
            if pi_m[a] <= 0.0:
                continue
            if mix[a] <= 0.0:
                return float(i_p + w * ctx_ip), -np.inf, np.inf
            ctx_term2 += pi_m[a] * np.log(mix[a])
        ctx_kl = 0.0
        for b in range(vj):
            if pj_m[b] <= 0.0:
                continue
            pc = pj[:, b] / pj_m[b]
            for a in range(vi):
                if pc[a] <= 0.0:
                    continue
                ctx_kl += pj_m[b] * pc[a] * np.log(pc[a] / q_cond[a, b])

        i_p += w * ctx_ip
        i_hat += w * (ctx_term1 - ctx_term2)
        e_kl += w * ctx_kl
    return float(i_p), float(i_hat), float(e_kl)


def prop4_check(p_model, q_model, i: int = 0, j: int = 1) -> PropReport:
    """|I_hat_q - I_p| <= E_{x_j} KL(p(x_i|..) || q(x_i|..)), exactly enumerated."""
    p_x = p_model.joint_x() if isinstance(p_model, DiscreteLatentModel) else np.asarray(p_model)
    q_x = q_model.joint_x() if isinstance(q_model, DiscreteLatentModel) else np.asarray(q_model)
    i_p, i_hat, e_kl = estimator_exact(p_x, q_x, i, j)
    lhs = abs(i_hat - i_p) if np.isfinite(i_hat) else np.inf
    return PropReport(name="prop4", lhs=lhs, rhs=e_kl,
                      meta={"i": i, "j": j, "i_p": i_p, "i_hat": i_hat})


# ---------------------------------------------------------------------------
# Exact-conditional model for estimator verification


class TableModel:
    """Masked-conditional interface backed by an exact joint table over x.

    Masked coordinates (including the query position) are marginalized out;
    observed coordinates are conditioned on. mask_id is one past the value
    range so it can never collide with a table value.
    """

    def __init__(self, joint_x):
        joint = np.asarray(joint_x, dtype=float)
        if (joint < 0).any() or abs(float(joint.sum()) - 1.0) > 1e-9:
            raise ConfigError("joint table must be a normalized distribution")
        if any(s != joint.shape[0] for s in joint.shape):
            raise ConfigError("all coordinates must share one vocab")
        self.joint = joint
        self.vocab = joint.shape[0]
        self.mask_id = self.vocab

    def masked_conditional(self, ids, pos):
        return self.masked_conditional_batch([ids], [pos])[0]

    def masked_conditional_batch(self, id_seqs, positions):
        rows = []
        for ids, pos in zip(id_seqs, positions):
            if len(ids) != self.joint.ndim:
                raise ConfigError("sequence length must match the table order")
            index = tuple(
                slice(None) if (ax == pos or ids[ax] == self.mask_id) else int(ids[ax])
                for ax in range(self.joint.ndim)
            )
            kept = [ax for ax in range(self.joint.ndim)
                    if ax == pos or ids[ax] == self.mask_id]
            sub = self.joint[index]
            p_axis = kept.index(pos)
            other = tuple(a for a in range(sub.ndim) if a != p_axis)
            marg = sub.sum(axis=other) if other else sub
            total = marg.sum()
            if total <= 0:
                raise ConfigError("conditioning event has zero probability")
            rows.append(marg / total)
        return np.stack(rows)

    def exact_pair_cond_mi(self, ids, i, j) -> float:
        """I(x_i; x_j | all other coordinates fixed at their observed values)."""
        index = tuple(
            slice(None) if ax in (i, j) else int(ids[ax])
            for ax in range(self.joint.ndim)
        )
        pair = self.joint[index]
        if i > j:
            pair = pair.T
        total = pair.sum()
        if total <= 0:
            raise ConfigError("conditioning event has zero probability")
        pair = pair / total
        return cond_mutual_info(pair, {0}, {1})
