"""
Model Manager - loads, validates and serialises routing model files.

Model file (JSON):
    {
      "n": 5,
      "s": [10, 5, 1, 3, 2],
      "x_max": [1, 1, 1, 1, 1],
      "edges": [{"from": 1, "to": 2, "r": 1, "u_max": 0.25}, {"from": 3, "to": "goal", "r": 1}, ...]
    }

"r" defaults to 0. Omitting "x_max" and every "u_max" gives the unconstrained problem;
giving only some of them is an error. An optional "name" string labels the instance.
Unknown fields are rejected.
"""
import hashlib
import json
import logging
import sys
from pathlib import Path
from typing import List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, StrictInt, ValidationError

from network.graph_manager import build_graph, edges_from_labels, to_canonical
from network.models import CapacityBounds, CostWeights, ProblemInstance
from utils.constants import APP_VERSION, GOAL_LABEL
from utils.exceptions import ModelError
from utils.validators import (validate_length, validate_nonnegative_vector,
                              validate_positive_vector)

logger = logging.getLogger(__name__)


class EdgeEntry(BaseModel):
    """One edge of the model file."""
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    tail: StrictInt = Field(..., alias="from", description="Tail vertex 1..n")
    head: Union[StrictInt, Literal["goal"]] = Field(..., alias="to", description="Head vertex or 'goal'")
    r: float = Field(0.0, description="Per-unit transport cost")
    u_max: Optional[float] = Field(None, description="Edge flow capacity")


class ModelFile(BaseModel):
    """Schema of a routing model file."""
    model_config = ConfigDict(extra="forbid")

    name: str = ""
    n: StrictInt
    edges: List[EdgeEntry]
    s: List[float]
    x_max: Optional[List[float]] = None


class ModelManager:
    """Loads routing models from JSON files and writes them back in canonical form."""

    def __init__(self, data_dir: Optional[str] = None):
        """Initialize with the directory holding bundled models."""
        if data_dir is None:
            if getattr(sys, 'frozen', False):
                app_dir = Path(sys.executable).parent
            else:
                app_dir = Path(__file__).parent.parent
            data_dir = str(app_dir / "data")
        self.data_dir = Path(data_dir)

    def bundled_path(self, name: str = "example1.json") -> Path:
        return self.data_dir / name

    def load(self, path) -> ProblemInstance:
        """Read and validate a model file."""
        path = Path(path)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ModelError(f"Model file not found: {path}")
        except json.JSONDecodeError as e:
            raise ModelError(f"Invalid JSON in {path}: {e}")
        instance = self.parse(raw, default_name=path.stem)
        logger.info("Loaded model %s (n=%d, m=%d, bounds=%s)",
                    instance.name, instance.n, instance.m, instance.has_bounds)
        return instance

    def parse(self, raw: dict, default_name: str = "") -> ProblemInstance:
        """Validate a parsed JSON document and build the problem instance."""
        try:
            model = ModelFile.model_validate(raw)
        except ValidationError as e:
            raise ModelError(f"Invalid model file: {e}")

        graph = build_graph(model.n, edges_from_labels((e.tail, e.head) for e in model.edges))

        valid, msg = validate_length(model.s, model.n, "s")
        if not valid:
            raise ModelError(msg)
        valid, msg = validate_positive_vector(model.s, "s")
        if not valid:
            raise ModelError(msg)
        r_file = [e.r for e in model.edges]
        valid, msg = validate_nonnegative_vector(r_file, "r")
        if not valid:
            raise ModelError(msg)
        costs = CostWeights(np.array(model.s, dtype=float), to_canonical(graph, r_file))

        bounds = self._parse_bounds(model, graph)
        return ProblemInstance(graph=graph, costs=costs, bounds=bounds,
                               name=model.name or default_name)

    def _parse_bounds(self, model: ModelFile, graph) -> Optional[CapacityBounds]:
        """Both x_max and every u_max, or none of them."""
        u_given = [e.u_max is not None for e in model.edges]
        if model.x_max is None and not any(u_given):
            return None
        if model.x_max is None or not all(u_given):
            raise ModelError("Capacity bounds must give x_max and u_max for every edge, or neither")

        valid, msg = validate_length(model.x_max, model.n, "x_max")
        if not valid:
            raise ModelError(msg)
        valid, msg = validate_positive_vector(model.x_max, "x_max")
        if not valid:
            raise ModelError(msg)
        u_file = [e.u_max for e in model.edges]
        valid, msg = validate_positive_vector(u_file, "u_max")
        if not valid:
            raise ModelError(msg)
        return CapacityBounds(np.array(model.x_max, dtype=float), to_canonical(graph, u_file))

    def to_dict(self, instance: ProblemInstance) -> dict:
        """Canonical JSON document of an instance (edges in canonical order)."""
        graph = instance.graph
        edges = []
        for k in range(graph.m):
            entry = {
                "from": graph.tails[k],
                "to": GOAL_LABEL if graph.is_goal_edge(k) else graph.heads[k],
                "r": float(instance.costs.r[k]),
            }
            if instance.bounds is not None:
                entry["u_max"] = float(instance.bounds.u_max[k])
            edges.append(entry)
        doc = {"name": instance.name, "n": graph.n, "edges": edges,
               "s": [float(v) for v in instance.costs.s]}
        if instance.bounds is not None:
            doc["x_max"] = [float(v) for v in instance.bounds.x_max]
        return doc

    def save(self, instance: ProblemInstance, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(instance), indent=2), encoding="utf-8")

    def instance_hash(self, instance: ProblemInstance) -> str:
        """sha256 of the canonical document, name excluded."""
        doc = self.to_dict(instance)
        doc.pop("name")
        payload = json.dumps(doc, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def report_header(self, instance: ProblemInstance) -> dict:
        """Fields every report carries for reproducibility."""
        return {"tool_version": APP_VERSION, "instance": instance.name,
                "instance_hash": self.instance_hash(instance)}
