"""Evaluation orchestration: run the model over a dataset, report metrics."""

from __future__ import annotations

import json

import numpy as np

from ..config import TrainConfig
from ..errors import ConfigError, MetricError
from ..fusion import PipelineSample, forward
from ..metrics import EvalRecord, auroc, iou, mean_iou, multilabel_map
from ..numerics import ParamStore
from ..semantics import ReferenceEncoder


def predict_records(
    params: ParamStore,
    config: TrainConfig,
    samples: list[PipelineSample],
    encoder: ReferenceEncoder,
) -> list[EvalRecord]:
    records = []
    for s in samples:
        if s.grid.dim != config.d or s.grid.num_frames != config.frames:
            raise ConfigError(
                f"sample {s.sample_id!r} dims ({s.grid.num_frames} frames, d={s.grid.dim}) "
                f"do not match checkpoint config ({config.frames} frames, d={config.d})"
            )
        if s.labels is None or s.labels.shape != (config.num_classes,):
            raise ConfigError(f"sample {s.sample_id!r} labels do not match checkpoint num_classes")
        res = forward(s, params, config, encoder)
        records.append(
            EvalRecord(
                sample_id=s.sample_id,
                gt_bbox=np.asarray(s.gt_bbox),
                pred_bbox=res.output.bbox,
                gt_labels=np.asarray(s.labels),
                pred_scores=res.output.class_probs,
            )
        )
    return records


def aggregate_report(records: list[EvalRecord]) -> dict:
    """Metric summary plus one row per sample; raises if metrics are undefined."""
    if not records:
        raise MetricError("evaluation requires at least one record")
    rows = [
        {
            "id": r.sample_id,
            "iou": iou(r.gt_bbox, r.pred_bbox),
            "pred_bbox": [float(v) for v in r.pred_bbox],
            "pred_scores": [float(v) for v in r.pred_scores],
        }
        for r in records
    ]
    return {
        "miou": mean_iou(records),
        "map": multilabel_map(records),
        "auroc": auroc(records),
        "num_samples": len(records),
        "samples": rows,
    }


def evaluate(
    params: ParamStore,
    config: TrainConfig,
    samples: list[PipelineSample],
    encoder: ReferenceEncoder,
) -> dict:
    return aggregate_report(predict_records(params, config, samples, encoder))


def write_report(path, report: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(report, sort_keys=True))
        fh.write("\n")
