"""Cross-attention fusion, prediction heads, losses, and the full forward.

Per branch (temporal = spatially pooled frames, spatial = temporally pooled
cells) the pooled sequence is enhanced by a scan layer; each enabled
hierarchy queries those enhanced tokens through its own cross-attention
(with learnable prompt rows appended to the projected queries), the
per-hierarchy outputs are mean-pooled and averaged into the branch vector
z, and small MLP heads regress the box and score the action classes. The
two branch predictions are averaged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import TrainConfig
from .errors import ConfigError, DimensionError, PipelineError
from .numerics import ParamStore, uniform_init
from .numerics import tape
from .numerics.tape import Var
from .retrieval import VisualTokenGrid, build_trajectory_set
from .semantics import (
    Detection,
    ReferenceBundle,
    ReferenceEncoder,
    build_scene_attribute_tokens,
    default_stopwords,
    embed_reference,
)
from .ssm import SsmParamVars, scan_var

HIERARCHIES = ("rv", "kwv", "bv")  # holistic / keyword / scene-attribute
BRANCHES = ("temporal", "spatial")


# -- pooling ----------------------------------------------------------------


def pool_spatial(grid: VisualTokenGrid) -> np.ndarray:
    """Temporal-branch input: per-frame mean over spatial cells, (T, d)."""
    return grid.tokens.mean(axis=1)


def pool_temporal(grid: VisualTokenGrid) -> np.ndarray:
    """Spatial-branch input: per-cell mean over frames, (S, d)."""
    return grid.tokens.mean(axis=0)


# -- cross-attention ----------------------------------------------------------


@dataclass
class HierarchyAttnParams:
    """Projections and learnable prompt rows for one (hierarchy, branch)."""

    w_q: np.ndarray  # (d_q, d_a)
    w_k: np.ndarray  # (d_s, d_a)
    w_v: np.ndarray  # (d_s, d_a)
    prompts: np.ndarray  # (N_p, d_a)


@dataclass
class AttnParamVars:
    w_q: Var
    w_k: Var
    w_v: Var
    prompts: Var


def cross_attention_var(queries: Var, context: Var, p: AttnParamVars) -> Var:
    if context.value.shape[0] < 1:
        raise DimensionError("cross_attention: empty context")
    d_a = p.w_q.value.shape[1]
    q_proj = tape.matmul(queries, p.w_q)
    if p.prompts.value.shape[0] > 0:
        q_full = tape.concat_rows([q_proj, p.prompts])
    else:
        q_full = q_proj
    keys = tape.matmul(context, p.w_k)
    values = tape.matmul(context, p.w_v)
    scores = tape.scale(tape.matmul(q_full, tape.transpose(keys)), 1.0 / np.sqrt(d_a))
    return tape.matmul(tape.softmax_rows(scores), values)


def cross_attention(
    queries: np.ndarray, context: np.ndarray, params: HierarchyAttnParams
) -> np.ndarray:
    """(Q + N_p) x d_a attention readout over the enhanced context tokens."""
    pv = AttnParamVars(Var(params.w_q), Var(params.w_k), Var(params.w_v), Var(params.prompts))
    return cross_attention_var(Var(np.asarray(queries)), Var(np.asarray(context)), pv).value


def mhs_ca_branch(
    enhanced: np.ndarray,
    hierarchy_queries: list[tuple[str, np.ndarray]],
    params_per_hierarchy: dict[str, HierarchyAttnParams],
) -> np.ndarray:
    """Mean over hierarchies of the row-pooled per-hierarchy attention output."""
    if not hierarchy_queries:
        raise ConfigError("mhs_ca_branch: no hierarchy enabled")
    pooled = []
    for tag, queries in hierarchy_queries:
        out = cross_attention(queries, enhanced, params_per_hierarchy[tag])
        pooled.append(out.mean(axis=0))
    return np.mean(pooled, axis=0)


def _mhs_ca_branch_var(
    enhanced: Var,
    hierarchy_queries: list[tuple[str, Var]],
    attn_vars: dict[str, AttnParamVars],
) -> Var:
    if not hierarchy_queries:
        raise ConfigError("mhs_ca_branch: no hierarchy enabled")
    pooled = [
        tape.mean_rows(cross_attention_var(q, enhanced, attn_vars[tag]))
        for tag, q in hierarchy_queries
    ]
    return tape.mean_of(pooled)


# -- heads and losses ---------------------------------------------------------


@dataclass
class HeadParamVars:
    w1: Var
    b1: Var
    w2: Var
    b2: Var


def _head_var(z: Var, p: HeadParamVars) -> Var:
    hidden = tape.relu(tape.add_rowvec(tape.matmul(z, p.w1), p.b1))
    return tape.sigmoid(tape.add_rowvec(tape.matmul(hidden, p.w2), p.b2))


def heads(
    z: np.ndarray, reg: tuple[np.ndarray, ...], cls: tuple[np.ndarray, ...]
) -> tuple[np.ndarray, np.ndarray]:
    """Apply the two d_a -> d_a -> out MLPs (ReLU hidden, sigmoid output)."""
    zv = Var(np.asarray(z, dtype=np.float64).reshape(1, -1))
    bbox = _head_var(zv, HeadParamVars(*[Var(a) for a in reg]))
    probs = _head_var(zv, HeadParamVars(*[Var(a) for a in cls]))
    return bbox.value[0], probs.value[0]


def fuse_predictions(
    temporal: tuple[np.ndarray, np.ndarray], spatial: tuple[np.ndarray, np.ndarray]
) -> tuple[np.ndarray, np.ndarray]:
    """Average the branch box and class predictions."""
    bbox = (np.asarray(temporal[0]) + np.asarray(spatial[0])) / 2.0
    probs = (np.asarray(temporal[1]) + np.asarray(spatial[1])) / 2.0
    return bbox, probs


PROB_EPS = 1e-7


def bce_loss(y: np.ndarray, y_hat: np.ndarray) -> float:
    """Mean binary cross entropy over classes, predictions clamped away from {0,1}."""
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    if y.shape != y_hat.shape:
        raise DimensionError(f"bce_loss: {y.shape} vs {y_hat.shape}")
    p = np.clip(y_hat, PROB_EPS, 1.0 - PROB_EPS)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


def mse_loss(b: np.ndarray, b_hat: np.ndarray) -> float:
    """Sum of squared errors over the four box coordinates."""
    b = np.asarray(b, dtype=np.float64)
    b_hat = np.asarray(b_hat, dtype=np.float64)
    if b.shape != (4,) or b_hat.shape != (4,):
        raise DimensionError(f"mse_loss: need length-4 boxes, got {b.shape} and {b_hat.shape}")
    return float(np.sum((b - b_hat) ** 2))


def _bce_var(y: np.ndarray, probs: Var) -> Var:
    n_c = probs.value.shape[1]
    yv = Var(np.asarray(y, dtype=np.float64).reshape(1, -1))
    ones = Var(np.ones_like(yv.value))
    p = tape.clip(probs, PROB_EPS, 1.0 - PROB_EPS)
    term = tape.add(
        tape.mul(yv, tape.log(p)),
        tape.mul(tape.add(ones, tape.scale(yv, -1.0)), tape.log(tape.add(ones, tape.scale(p, -1.0)))),
    )
    return tape.scale(tape.sum_all(term), -1.0 / n_c)


def _mse_var(b: np.ndarray, bbox: Var) -> Var:
    diff = tape.add(bbox, Var(-np.asarray(b, dtype=np.float64).reshape(1, -1)))
    return tape.sum_all(tape.mul(diff, diff))


# -- parameter construction ----------------------------------------------------


def init_model_params(config: TrainConfig, seed: int | None = None) -> ParamStore:
    """Build every learnable tensor; toggles never change what exists.

    Creation order is fixed so a given seed always produces the same store,
    which keeps ablated variants initialized identically to the full model.
    """
    config.validate()
    seed = config.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    params = ParamStore(seed=seed)

    params.add("scene_proj.w", uniform_init(rng, config.d + 4, (config.d + 4, config.d)))
    params.add("scene_proj.b", np.zeros(config.d))

    def add_ssm(name: str, in_dim: int):
        params.add(f"ssm.{name}.in_proj", uniform_init(rng, in_dim, (in_dim, config.d_s)))
        params.add(f"ssm.{name}.A", np.diag(rng.uniform(0.5, 0.95, size=config.n)))
        params.add(f"ssm.{name}.B", uniform_init(rng, config.d_s, (config.n, config.d_s)))
        params.add(f"ssm.{name}.C", uniform_init(rng, config.n, (config.d_s, config.n)))

    add_ssm("keyword", config.d)
    add_ssm("scene", config.d)
    add_ssm("holistic_temporal", config.d)
    add_ssm("holistic_spatial", config.d)

    query_dims = {"rv": config.d, "kwv": config.d_s, "bv": config.d_s}
    for tag in HIERARCHIES:
        for branch in BRANCHES:
            base = f"attn.{tag}.{branch}"
            params.add(f"{base}.w_q", uniform_init(rng, query_dims[tag], (query_dims[tag], config.d_a)))
            params.add(f"{base}.w_k", uniform_init(rng, config.d_s, (config.d_s, config.d_a)))
            params.add(f"{base}.w_v", uniform_init(rng, config.d_s, (config.d_s, config.d_a)))
            params.add(f"{base}.prompts", uniform_init(rng, config.d_a, (config.n_prompts, config.d_a)))

    for branch in BRANCHES:
        for head, out_dim in (("reg", 4), ("cls", config.num_classes)):
            base = f"head.{branch}.{head}"
            params.add(f"{base}.w1", uniform_init(rng, config.d_a, (config.d_a, config.d_a)))
            params.add(f"{base}.b1", np.zeros(config.d_a))
            params.add(f"{base}.w2", uniform_init(rng, config.d_a, (config.d_a, out_dim)))
            params.add(f"{base}.b2", np.zeros(out_dim))

    return params


def _ssm_vars(pv: dict[str, Var], name: str) -> SsmParamVars:
    return SsmParamVars(
        in_proj=pv[f"ssm.{name}.in_proj"],
        A=pv[f"ssm.{name}.A"],
        B=pv[f"ssm.{name}.B"],
        C=pv[f"ssm.{name}.C"],
    )


def _attn_vars(pv: dict[str, Var], tag: str, branch: str) -> AttnParamVars:
    base = f"attn.{tag}.{branch}"
    return AttnParamVars(pv[f"{base}.w_q"], pv[f"{base}.w_k"], pv[f"{base}.w_v"], pv[f"{base}.prompts"])


def _head_vars(pv: dict[str, Var], branch: str, head: str) -> HeadParamVars:
    base = f"head.{branch}.{head}"
    return HeadParamVars(pv[f"{base}.w1"], pv[f"{base}.b1"], pv[f"{base}.w2"], pv[f"{base}.b2"])


# -- full forward ---------------------------------------------------------------


@dataclass
class PipelineSample:
    """One model input: token grid, reference, keyframe detections, targets."""

    grid: VisualTokenGrid
    reference: ReferenceBundle
    detections: list[Detection]
    gt_bbox: np.ndarray | None = None
    labels: np.ndarray | None = None  # multi-hot (num_classes,)
    sample_id: str = ""


@dataclass
class ModelOutput:
    bbox: np.ndarray  # (4,) fused, in (0,1)
    class_probs: np.ndarray  # (num_classes,) fused
    bbox_temporal: np.ndarray | None
    probs_temporal: np.ndarray | None
    bbox_spatial: np.ndarray | None
    probs_spatial: np.ndarray | None
    z_temporal: np.ndarray | None
    z_spatial: np.ndarray | None


@dataclass
class ForwardResult:
    output: ModelOutput
    loss: Var | None
    selection_signature: tuple
    bbox_var: Var
    probs_var: Var


def prepare_reference(text: str, encoder: ReferenceEncoder, stop_set=None) -> ReferenceBundle:
    return embed_reference(text, default_stopwords() if stop_set is None else stop_set, encoder)


def forward(
    sample: PipelineSample,
    params: ParamStore,
    config: TrainConfig,
    encoder: ReferenceEncoder,
    param_vars: dict[str, Var] | None = None,
) -> ForwardResult:
    """Run semantics, retrieval, scans, fusion, heads, and (optionally) the loss.

    ``param_vars`` lets a caller share one set of leaf Vars across a batch so
    a single backward pass accumulates all gradients.
    """
    pv = params.as_vars() if param_vars is None else param_vars
    bundle = sample.reference

    try:
        scene_tokens = build_scene_attribute_tokens(
            sample.detections,
            encoder,
            params["scene_proj.w"],
            params["scene_proj.b"],
            conf_threshold=config.conf_threshold,
            max_count=config.max_detections,
        )
    except Exception as exc:
        raise PipelineError("semantics", exc) from exc

    try:
        kw_set = build_trajectory_set(bundle.keyword_embeddings, sample.grid, "keyword")
        scene_queries = (
            np.stack([t.vector for t in scene_tokens])
            if scene_tokens
            else np.zeros((0, sample.grid.dim))
        )
        bs_set = build_trajectory_set(scene_queries, sample.grid, "scene-attribute")
    except Exception as exc:
        raise PipelineError("retrieval", exc) from exc
    signature = (kw_set.indices_signature(), bs_set.indices_signature())

    use_kw = config.use_keyword and len(kw_set) > 0
    use_bv = config.use_attribute and len(bs_set) > 0
    use_rv = config.use_holistic
    if not (use_rv or use_kw or use_bv):
        raise ConfigError(f"all hierarchies disabled for sample {sample.sample_id!r}")

    try:
        t_kw = None
        if use_kw:
            finals = [
                tape.take_row(scan_var(Var(t.tokens), _ssm_vars(pv, "keyword")), t.length - 1)
                for t in kw_set.trajectories
            ]
            t_kw = tape.concat_rows(finals)
        h_bs = None
        if use_bv:
            scans = [scan_var(Var(t.tokens), _ssm_vars(pv, "scene")) for t in bs_set.trajectories]
            h_bs = tape.mean_of(scans)
    except Exception as exc:
        raise PipelineError("ssm", exc) from exc

    branch_outputs: dict[str, tuple[Var, Var, Var]] = {}
    try:
        for branch, pooled in (
            ("temporal", pool_spatial(sample.grid)),
            ("spatial", pool_temporal(sample.grid)),
        ):
            if branch == "temporal" and not config.use_temporal:
                continue
            if branch == "spatial" and not config.use_spatial:
                continue
            enhanced = scan_var(Var(pooled), _ssm_vars(pv, f"holistic_{branch}"))
            if config.use_mhs_ca:
                queries: list[tuple[str, Var]] = []
                if use_rv:
                    queries.append(("rv", Var(bundle.holistic)))
                if use_kw:
                    queries.append(("kwv", t_kw))
                if use_bv:
                    queries.append(("bv", h_bs))
                attn = {tag: _attn_vars(pv, tag, branch) for tag, _ in queries}
                z = _mhs_ca_branch_var(enhanced, queries, attn)
            else:
                z = tape.mean_rows(enhanced)
            bbox = _head_var(z, _head_vars(pv, branch, "reg"))
            probs = _head_var(z, _head_vars(pv, branch, "cls"))
            branch_outputs[branch] = (z, bbox, probs)
    except Exception as exc:
        raise PipelineError("fusion", exc) from exc

    bbox_var = tape.mean_of([branch_outputs[b][1] for b in branch_outputs])
    probs_var = tape.mean_of([branch_outputs[b][2] for b in branch_outputs])

    loss = None
    if sample.gt_bbox is not None and sample.labels is not None:
        try:
            loss = tape.add(
                _bce_var(sample.labels, probs_var),
                tape.scale(_mse_var(sample.gt_bbox, bbox_var), config.lambda_box),
            )
            if config.aux_branch_loss:
                per_branch = [
                    tape.add(
                        _bce_var(sample.labels, probs),
                        tape.scale(_mse_var(sample.gt_bbox, bbox), config.lambda_box),
                    )
                    for _, bbox, probs in branch_outputs.values()
                ]
                loss = tape.add(loss, tape.mean_of(per_branch))
        except Exception as exc:
            raise PipelineError("loss", exc) from exc

    def _branch(branch: str, slot: int):
        return branch_outputs[branch][slot].value[0] if branch in branch_outputs else None

    output = ModelOutput(
        bbox=bbox_var.value[0].copy(),
        class_probs=probs_var.value[0].copy(),
        bbox_temporal=_branch("temporal", 1),
        probs_temporal=_branch("temporal", 2),
        bbox_spatial=_branch("spatial", 1),
        probs_spatial=_branch("spatial", 2),
        z_temporal=_branch("temporal", 0),
        z_spatial=_branch("spatial", 0),
    )
    return ForwardResult(
        output=output,
        loss=loss,
        selection_signature=signature,
        bbox_var=bbox_var,
        probs_var=probs_var,
    )
