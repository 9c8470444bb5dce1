"""JSON model files and CSV / JSON result emission.

Model file layout::

    {
      "sources": [[0, 1], [1, 2], [0, 2]],      # row i = parties of source i
      "n_parties": 3,
      "labels": {"parties": ["A", "B", "C"]},   # free-form metadata
      "states": [{"dims": [2, 2], "amplitudes": [re, im, re, im, ...]}],
      "povms": [{"labels": [0, 1, null], "elements": [[[re, im, ...], ...], ...]}],
      "fail": [0.1, 0.2, 0.3]
    }

Amplitudes are the ``d_left x d_right`` state matrix in row-major order,
with the left factor belonging to the lower-indexed party. A party's space
is the tensor product of its edges in ascending source order. Matrix rows
are interleaved real/imaginary pairs. A ``null`` label is the failure
outcome. Classical models replace ``states``/``povms`` by
``source_dists`` and ``responses`` (flat row-major arrays with ``shape``),
and distribution files carry ``alphabets`` and flat ``probabilities``.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path
from typing import Any, Hashable, Mapping, Sequence

import numpy as np

from .classical import ClassicalNetworkModel
from .distribution import FAIL, OutcomeDistribution
from .errors import FormatError, NetfinnerError
from .failing import FailureProbabilities
from .network import NetworkGraph
from .quantum import PartyPOVM, QuantumNetworkModel, SourceState

TOOL = "netfinner"


def tool_version() -> str:
    try:
        return version("artifact")
    except PackageNotFoundError:
        return "0+unknown"


@dataclass(frozen=True)
class LoadedModel:
    graph: NetworkGraph
    quantum: QuantumNetworkModel | None = None
    classical: ClassicalNetworkModel | None = None
    distribution: OutcomeDistribution | None = None
    fail: FailureProbabilities | None = None


# --- decoding -----------------------------------------------------------------------


def _label_in(x: Any) -> Hashable:
    if x is None:
        return FAIL
    if isinstance(x, list):
        return tuple(_label_in(v) for v in x)
    return x


def _label_out(x: Hashable) -> Any:
    if x == FAIL:
        return None
    if isinstance(x, tuple):
        return [_label_out(v) for v in x]
    if isinstance(x, np.generic):
        return x.item()
    return x


def _complex_vector(flat: Sequence[float], n: int, what: str) -> np.ndarray:
    arr = np.asarray(flat, dtype=float)
    if arr.shape != (2 * n,):
        raise FormatError(f"{what}: expected {2 * n} interleaved real/imag numbers, got shape {arr.shape}")
    return arr[0::2] + 1j * arr[1::2]


def _complex_matrix(rows: Sequence[Sequence[float]], what: str) -> np.ndarray:
    n = len(rows)
    return np.array([_complex_vector(r, n, f"{what} row {k}") for k, r in enumerate(rows)]).reshape(n, n)


def graph_from_json(data: Mapping[str, Any]) -> NetworkGraph:
    try:
        sources = data["sources"]
        n_parties = int(data["n_parties"])
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"model needs 'sources' and 'n_parties': {exc}") from exc
    meta = {"labels": data.get("labels", {})}
    return NetworkGraph.from_sources(sources, n_parties, meta)


def model_from_json(data: Mapping[str, Any]) -> LoadedModel:
    if not isinstance(data, Mapping):
        raise FormatError("model file must contain a JSON object")
    g = graph_from_json(data)
    fail = FailureProbabilities(tuple(data["fail"])) if data.get("fail") is not None else None
    try:
        if "states" in data:
            states = []
            for k, s in enumerate(data["states"]):
                dl, dr = (int(d) for d in s["dims"])
                amps = _complex_vector(s["amplitudes"], dl * dr, f"state {k}")
                states.append(SourceState((dl, dr), amps))
            povms = []
            for j, p in enumerate(data["povms"]):
                labels = tuple(_label_in(x) for x in p["labels"])
                elems = tuple(_complex_matrix(m, f"party {j} element {lab}") for lab, m in zip(labels, p["elements"]))
                povms.append(PartyPOVM(labels, elems))
            cap = int(data.get("dim_cap", 4096))
            return LoadedModel(g, quantum=QuantumNetworkModel(g, tuple(states), tuple(povms), cap), fail=fail)
        if "responses" in data:
            dists = tuple(np.asarray(p, dtype=float) for p in data["source_dists"])
            responses = []
            for r in data["responses"]:
                values = [_label_in(v) for v in r["values"]]
                arr = np.empty(len(values), dtype=object)
                arr[:] = values
                if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in values):
                    arr = np.asarray(values)
                responses.append(arr.reshape(tuple(int(s) for s in r["shape"])))
            return LoadedModel(g, classical=ClassicalNetworkModel(g, dists, tuple(responses)), fail=fail)
        if "probabilities" in data:
            alphabets = tuple(tuple(_label_in(x) for x in a) for a in data["alphabets"])
            probs = np.asarray(data["probabilities"], dtype=float).reshape(tuple(len(a) for a in alphabets))
            return LoadedModel(g, distribution=OutcomeDistribution(alphabets, probs, g), fail=fail)
    except NetfinnerError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed model: {exc!r}") from exc
    return LoadedModel(g, fail=fail)


def load_model(path: str | Path) -> LoadedModel:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc
    return model_from_json(data)


# --- encoding -----------------------------------------------------------------------


def _interleave(v: np.ndarray) -> list[float]:
    v = np.asarray(v, dtype=complex).reshape(-1)
    out = np.empty(2 * v.size)
    out[0::2], out[1::2] = v.real, v.imag
    return [float(x) for x in out]


def graph_to_json(graph: NetworkGraph) -> dict:
    return {
        "sources": graph.source_lists(),
        "n_parties": graph.n_parties,
        "labels": dict(graph.metadata.get("labels", {})),
    }


def quantum_model_to_json(model: QuantumNetworkModel, fail: FailureProbabilities | None = None) -> dict:
    out = graph_to_json(model.graph)
    out["states"] = [{"dims": list(s.dims), "amplitudes": _interleave(s.matrix)} for s in model.states]
    out["povms"] = [
        {
            "labels": [_label_out(lab) for lab in p.labels],
            "elements": [[_interleave(row) for row in m] for m in p.elements],
        }
        for p in model.povms
    ]
    if model.dim_cap != 4096:
        out["dim_cap"] = model.dim_cap
    if fail is not None:
        out["fail"] = list(fail.e)
    return out


def distribution_to_json(dist: OutcomeDistribution) -> dict:
    """Same layout as a distribution model file, so the output loads back."""
    out = graph_to_json(dist.graph) if dist.graph is not None else {}
    out["alphabets"] = [[_label_out(x) for x in a] for a in dist.alphabets]
    out["probabilities"] = [float(x) for x in dist.clamped().reshape(-1)]
    return out


def distribution_rows(dist: OutcomeDistribution) -> tuple[list[str], list[list[Any]]]:
    p = dist.clamped()
    head = [f"party_{j}" for j in range(dist.n_parties)] + ["probability"]
    rows = [[_csv_label(x) for x in outcome] + [float(p[dist.index(outcome)])] for outcome, _ in dist.items()]
    return head, rows


def _csv_label(x: Hashable) -> str:
    return FAIL if x == FAIL else str(x)


# --- headers and deterministic emission -----------------------------------------------------


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False, default=_default)


def _default(obj: Any) -> Any:
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, (set, frozenset)):
        return sorted(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def config_hash(config: Mapping[str, Any]) -> str:
    return hashlib.sha256(canonical_json(config).encode("utf-8")).hexdigest()[:16]


def header(config: Mapping[str, Any], seed: int | None) -> dict:
    return {"tool": TOOL, "version": tool_version(), "seed": seed, "config_hash": config_hash(config)}


def render_json(payload: Mapping[str, Any], config: Mapping[str, Any], seed: int | None) -> str:
    doc = {"header": header(config, seed), **payload}
    return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False, default=_default) + "\n"


def render_csv(
    columns: Sequence[str],
    rows: Sequence[Sequence[Any]],
    config: Mapping[str, Any],
    seed: int | None,
) -> str:
    h = header(config, seed)
    buf = io.StringIO()
    for key in ("tool", "version", "seed", "config_hash"):
        buf.write(f"# {key}={h[key]}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def write_text(path: str | Path | None, text: str) -> None:
    """Write to ``path``, or to stdout when ``path`` is None or ``-``."""
    if path is None or str(path) == "-":
        import sys

        sys.stdout.write(text)
        return
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise FormatError(f"cannot write {path}: {exc.strerror}") from exc
