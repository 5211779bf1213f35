"""Scenario files and output serialization.

Two scenario formats are understood, both JSON:

- MDP change scenario: ``{n_states, n_actions, P0, P1, r0, r1, nu}`` with
  ``P*`` indexed ``[action][row][col]`` and ``r*`` indexed ``[row][action]``.
  Rows whose sums stray from one by more than 1e-9 are rejected with the
  offending site named; accepted rows are renormalized exactly.
- Linear change scenario: ``{A, B, F, theta, Q, K, R, nu}``.

Infinite values serialize as the string ``"inf"`` in both JSON and CSV, and
CSV fields are locale-independent decimals with 12 significant digits.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from .errors import ScenarioParseError
from .linear import LinearSystem, make_linear_system
from .mdp import Mdp, Policy, make_mdp, validate_policy
from .synthesis import SynthesisConfig

PARSER_ROW_TOL = 1e-9


@dataclass(frozen=True)
class MdpScenario:
    """Parsed MDP change scenario (policies are supplied separately)."""

    m0: Mdp
    m1: Mdp
    nu: int


def _matrix(raw: Any, name: str, rows: int, cols: int) -> np.ndarray:
    try:
        arr = np.asarray(raw, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ScenarioParseError(f"{name} is not a numeric matrix") from exc
    if arr.shape != (rows, cols):
        raise ScenarioParseError(
            f"{name} has shape {arr.shape}, expected ({rows}, {cols})"
        )
    return arr


def _kernel(raw: Any, name: str, n_actions: int, n_states: int) -> np.ndarray:
    if not isinstance(raw, list) or len(raw) != n_actions:
        raise ScenarioParseError(f"{name} must list one matrix per action")
    P = np.empty((n_actions, n_states, n_states))
    for u, rows in enumerate(raw):
        mat = _matrix(rows, f"{name}[action {u}]", n_states, n_states)
        for x in range(n_states):
            row = mat[x]
            neg = np.flatnonzero(row < 0)
            if neg.size:
                raise ScenarioParseError(
                    f"{name}[action {u}][row {x}][col {neg[0]}] is negative"
                )
            s = row.sum()
            if abs(s - 1.0) > PARSER_ROW_TOL:
                raise ScenarioParseError(
                    f"{name}[action {u}][row {x}] sums to {s!r}, "
                    f"violating stochasticity beyond {PARSER_ROW_TOL}"
                )
            P[u, x] = row / s
    return P


def load_mdp_scenario(path: str) -> MdpScenario:
    """Parse an MDP change-scenario file."""
    data = _load_json(path)
    for key in ("n_states", "n_actions", "P0", "P1", "r0", "r1", "nu"):
        if key not in data:
            raise ScenarioParseError(f"missing field {key!r} in {path}")
    try:
        n_states = int(data["n_states"])
        n_actions = int(data["n_actions"])
        nu = int(data["nu"])
    except (TypeError, ValueError) as exc:
        raise ScenarioParseError("n_states, n_actions, nu must be integers") from exc
    if n_states < 1 or n_actions < 1 or nu < 1:
        raise ScenarioParseError("n_states, n_actions, nu must be positive")
    P0 = _kernel(data["P0"], "P0", n_actions, n_states)
    P1 = _kernel(data["P1"], "P1", n_actions, n_states)
    r0 = _matrix(data["r0"], "r0", n_states, n_actions)
    r1 = _matrix(data["r1"], "r1", n_states, n_actions)
    return MdpScenario(m0=make_mdp(P0, r0), m1=make_mdp(P1, r1), nu=nu)


def load_linear_scenario(path: str) -> LinearSystem:
    """Parse a linear change-scenario file."""
    data = _load_json(path)
    for key in ("A", "B", "F", "theta", "Q", "K", "R", "nu"):
        if key not in data:
            raise ScenarioParseError(f"missing field {key!r} in {path}")
    try:
        return make_linear_system(
            data["A"], data["B"], data["F"], data["theta"],
            data["Q"], data["K"], data["R"], int(data["nu"]),
        )
    except (TypeError, ValueError) as exc:
        raise ScenarioParseError(f"linear scenario is malformed: {exc}") from exc


def is_linear_scenario(path: str) -> bool:
    data = _load_json(path)
    return "A" in data and "P0" not in data


def load_policy(path: str, m: Mdp) -> Policy:
    """Parse a policy file: a JSON states-by-actions matrix."""
    raw = _load_json(path)
    mat = _matrix(raw, "policy", m.n_states, m.n_actions)
    return validate_policy(Policy(mat), m)


def load_synthesis_config(path: str) -> SynthesisConfig:
    data = _load_json(path)
    if not isinstance(data, dict):
        raise ScenarioParseError("solver config must be a JSON object")
    allowed = set(SynthesisConfig.__dataclass_fields__)
    unknown = set(data) - allowed
    if unknown:
        raise ScenarioParseError(f"unknown solver config fields: {sorted(unknown)}")
    return SynthesisConfig(**data).validate()


def _load_json(path: str):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ScenarioParseError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(
            f"{path} is not valid JSON (line {exc.lineno}, column {exc.colno})"
        ) from exc


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------


def _sanitize(obj):
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _sanitize(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if math.isnan(x):
            return "nan"
        return x
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


def json_dumps(obj) -> str:
    """JSON with infinities spelled as the strings "inf"/"-inf"."""
    return json.dumps(_sanitize(obj), indent=2)


def fmt_number(x) -> str:
    """Locale-independent decimal with 12 significant digits."""
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return f"{x:.12g}"


def csv_lines(header: list[str], rows: list[list]) -> str:
    out = [",".join(header)]
    for row in rows:
        out.append(",".join(
            cell if isinstance(cell, str) else fmt_number(cell) for cell in row
        ))
    return "\n".join(out) + "\n"
