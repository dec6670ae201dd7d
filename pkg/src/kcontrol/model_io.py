"""Versioned structured-text (JSON) persistence for fitted models."""

from __future__ import annotations

import json

import numpy as np

from .operators import ControlOperator, OperatorBank
from .optimize import ControlSystem, FittedModel, LinearizedModel
from .propagation import adjoint_transitions, forward_solve
from .rkhs import KernelSpec, SupportSet

FORMAT = "kcontrol-model"
VERSION = 1


def save_model(model, path) -> None:
    base = model.base if isinstance(model, LinearizedModel) else model
    doc = {
        "format": FORMAT,
        "version": VERSION,
        "kernel_scale": base.support.kernel.scale,
        "offset": base.system.offset,
        "seed": base.seed,
        "support_points": base.support.points.tolist(),
        "operators": [{"kind": op.kind, "vector": op.vector.tolist()}
                      for op in base.bank.ops],
        "control": base.control.tolist(),
        "beta": (model.beta.tolist() if isinstance(model, LinearizedModel)
                 else None),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != FORMAT:
        raise ValueError(f"{path} is not a {FORMAT} file")
    if doc.get("version") != VERSION:
        raise ValueError(f"unsupported model version {doc.get('version')}")
    support = SupportSet.from_points(np.asarray(doc["support_points"]),
                                     KernelSpec(scale=doc["kernel_scale"]))
    bank = OperatorBank(ops=tuple(
        ControlOperator(op["kind"], np.asarray(op["vector"]))
        for op in doc["operators"]))
    system = ControlSystem(bank=bank, support=support, offset=doc["offset"])
    control = np.asarray(doc["control"], dtype=float)
    traj = forward_solve(control, bank, support, system.offset)
    fitted = FittedModel(control=control, system=system, trajectory=traj,
                         seed=doc.get("seed"))
    if doc.get("beta") is None:
        return fitted
    bundle = adjoint_transitions(control, bank, support)
    return LinearizedModel(base=fitted, beta=np.asarray(doc["beta"], dtype=float),
                           adjoint=bundle)
