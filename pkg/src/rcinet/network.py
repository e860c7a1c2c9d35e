"""Coupled-network data model, JSON ingestion, and monolithic aggregation.

A network is an ordered list of subsystems (local dynamics plus constraint
zonotopes) and a list of directed coupling blocks.  Parsing is strict:
every schema or dimension problem is reported with the JSON path of the
offending field.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .zonotope import Zonotope, ZonotopeError


class NetworkError(ValueError):
    """Schema or consistency violation; message carries the JSON path."""


@dataclass
class Subsystem:
    id: str
    A: np.ndarray
    B: np.ndarray
    Gx: Zonotope
    Gu: Zonotope
    Gd: Zonotope

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    @property
    def input_dim(self) -> int:
        return self.B.shape[1]


@dataclass
class Coupling:
    from_id: str
    to_id: str
    A: np.ndarray | None = None  # state block; None means zero
    B: np.ndarray | None = None  # input block; None means zero


@dataclass
class NetworkSystem:
    subsystems: list[Subsystem]
    couplings: list[Coupling]
    metadata: dict | None = None
    _index: dict[str, int] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._index = {sub.id: i for i, sub in enumerate(self.subsystems)}
        self.validate()

    def validate(self) -> None:
        if len(self._index) != len(self.subsystems):
            seen = set()
            for sub in self.subsystems:
                if sub.id in seen:
                    raise NetworkError(f"duplicate subsystem id {sub.id!r}")
                seen.add(sub.id)
        for pos, c in enumerate(self.couplings):
            path = f"couplings[{pos}]"
            if c.from_id == c.to_id:
                raise NetworkError(f"{path}: self-coupling on {c.to_id!r}")
            for key, sid in (("from", c.from_id), ("to", c.to_id)):
                if sid not in self._index:
                    raise NetworkError(
                        f"{path}.{key}: reference to undeclared subsystem {sid!r}"
                    )
            to = self.subsystems[self._index[c.to_id]]
            src = self.subsystems[self._index[c.from_id]]
            if c.A is not None and c.A.shape != (to.dim, src.dim):
                raise NetworkError(
                    f"{path}.A: expected shape {(to.dim, src.dim)}, got {c.A.shape}"
                )
            if c.B is not None and c.B.shape != (to.dim, src.input_dim):
                raise NetworkError(
                    f"{path}.B: expected shape {(to.dim, src.input_dim)}, "
                    f"got {c.B.shape}"
                )

    def subsystem(self, sid: str) -> Subsystem:
        return self.subsystems[self._index[sid]]

    def couplings_into(self, sid: str) -> list[Coupling]:
        return [c for c in self.couplings if c.to_id == sid]

    @property
    def ids(self) -> list[str]:
        return [sub.id for sub in self.subsystems]

    def to_json_dict(self) -> dict:
        doc: dict = {
            "subsystems": [
                {
                    "id": sub.id,
                    "A": sub.A.tolist(),
                    "B": sub.B.tolist(),
                    "Gx": sub.Gx.to_json_dict(),
                    "Gu": sub.Gu.to_json_dict(),
                    "Gd": sub.Gd.to_json_dict(),
                }
                for sub in self.subsystems
            ],
            "couplings": [
                {
                    "from": c.from_id,
                    "to": c.to_id,
                    **({"A": c.A.tolist()} if c.A is not None else {}),
                    **({"B": c.B.tolist()} if c.B is not None else {}),
                }
                for c in self.couplings
            ],
        }
        if self.metadata is not None:
            doc["metadata"] = self.metadata
        return doc


def _matrix(value, path: str, rows: int | None = None,
            cols: int | None = None) -> np.ndarray:
    if not isinstance(value, list) or not value or not all(
        isinstance(row, list) for row in value
    ):
        raise NetworkError(f"{path}: expected a non-empty list of rows")
    width = len(value[0])
    for i, row in enumerate(value):
        if len(row) != width:
            raise NetworkError(f"{path}[{i}]: ragged row of length {len(row)}")
        for j, entry in enumerate(row):
            if not isinstance(entry, (int, float)) or isinstance(entry, bool):
                raise NetworkError(f"{path}[{i}][{j}]: expected a number")
    mat = np.array(value, dtype=float)
    if not np.all(np.isfinite(mat)):
        raise NetworkError(f"{path}: entries must be finite (no NaN/Inf)")
    if rows is not None and mat.shape[0] != rows:
        raise NetworkError(f"{path}: expected {rows} rows, got {mat.shape[0]}")
    if cols is not None and mat.shape[1] != cols:
        raise NetworkError(f"{path}: expected {cols} columns, got {mat.shape[1]}")
    return mat


def _zonotope(value, path: str, dim: int, centered: bool = True) -> Zonotope:
    if not isinstance(value, dict):
        raise NetworkError(f"{path}: expected an object with center/generators")
    for key in ("center", "generators"):
        if key not in value:
            raise NetworkError(f"{path}.{key}: missing")
    center = value["center"]
    if not isinstance(center, list) or len(center) != dim:
        raise NetworkError(f"{path}.center: expected a vector of length {dim}")
    gen_rows = value["generators"]
    if not isinstance(gen_rows, list) or len(gen_rows) != dim:
        raise NetworkError(f"{path}.generators: expected {dim} rows")
    generators = np.array(gen_rows, dtype=float).reshape(dim, -1) if all(
        isinstance(r, list) for r in gen_rows
    ) else None
    if generators is None:
        raise NetworkError(f"{path}.generators: expected a list of rows")
    try:
        z = Zonotope(np.array(center, dtype=float), generators)
    except (ZonotopeError, ValueError) as exc:
        raise NetworkError(f"{path}: {exc}") from exc
    if centered and not z.is_centered:
        raise NetworkError(f"{path}.center: constraint zonotopes must be centered at 0")
    return z


def parse_network(text: str | dict) -> NetworkSystem:
    """Parse and fully validate a network document (JSON text or dict)."""
    if isinstance(text, (str, bytes)):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise NetworkError(f"invalid JSON: {exc}") from exc
    else:
        doc = text
    if not isinstance(doc, dict):
        raise NetworkError("top level: expected an object")
    subs_doc = doc.get("subsystems")
    if not isinstance(subs_doc, list) or not subs_doc:
        raise NetworkError("subsystems: expected a non-empty list")
    subsystems = []
    for i, sd in enumerate(subs_doc):
        path = f"subsystems[{i}]"
        if not isinstance(sd, dict):
            raise NetworkError(f"{path}: expected an object")
        sid = sd.get("id")
        if not isinstance(sid, str) or not sid:
            raise NetworkError(f"{path}.id: expected a non-empty string")
        A = _matrix(sd.get("A"), f"{path}.A")
        if A.shape[0] != A.shape[1]:
            raise NetworkError(f"{path}.A: must be square, got {A.shape}")
        n = A.shape[0]
        B = _matrix(sd.get("B"), f"{path}.B", rows=n)
        m = B.shape[1]
        subsystems.append(
            Subsystem(
                id=sid,
                A=A,
                B=B,
                Gx=_zonotope(sd.get("Gx"), f"{path}.Gx", n),
                Gu=_zonotope(sd.get("Gu"), f"{path}.Gu", m),
                Gd=_zonotope(sd.get("Gd"), f"{path}.Gd", n),
            )
        )
    couplings = []
    coup_doc = doc.get("couplings", [])
    if not isinstance(coup_doc, list):
        raise NetworkError("couplings: expected a list")
    by_id = {sub.id: sub for sub in subsystems}
    for i, cd in enumerate(coup_doc):
        path = f"couplings[{i}]"
        if not isinstance(cd, dict):
            raise NetworkError(f"{path}: expected an object")
        for key in ("from", "to"):
            if not isinstance(cd.get(key), str):
                raise NetworkError(f"{path}.{key}: expected a subsystem id string")
        from_id, to_id = cd["from"], cd["to"]
        if to_id not in by_id:
            raise NetworkError(
                f"{path}.to: reference to undeclared subsystem {to_id!r}"
            )
        if from_id not in by_id:
            raise NetworkError(
                f"{path}.from: reference to undeclared subsystem {from_id!r}"
            )
        to, src = by_id[to_id], by_id[from_id]
        A = (
            _matrix(cd["A"], f"{path}.A", rows=to.dim, cols=src.dim)
            if "A" in cd
            else None
        )
        B = (
            _matrix(cd["B"], f"{path}.B", rows=to.dim, cols=src.input_dim)
            if "B" in cd
            else None
        )
        couplings.append(Coupling(from_id=from_id, to_id=to_id, A=A, B=B))
    metadata = doc.get("metadata")
    if metadata is not None and not isinstance(metadata, dict):
        raise NetworkError("metadata: expected an object")
    return NetworkSystem(subsystems=subsystems, couplings=couplings, metadata=metadata)


def serialize_network(net: NetworkSystem, indent: int | None = None) -> str:
    return json.dumps(net.to_json_dict(), indent=indent, sort_keys=False)


def aggregate(net: NetworkSystem):
    """Stack the coupled network into one monolithic system.

    Returns (A, B, Gx, Gu, Gd) with block matrices in subsystem order and
    block-diagonal constraint generators (Cartesian-product sets).
    """
    dims = [sub.dim for sub in net.subsystems]
    input_dims = [sub.input_dim for sub in net.subsystems]
    x_off = np.concatenate([[0], np.cumsum(dims)])
    u_off = np.concatenate([[0], np.cumsum(input_dims)])
    n, m = int(x_off[-1]), int(u_off[-1])
    A = np.zeros((n, n))
    B = np.zeros((n, m))
    for i, sub in enumerate(net.subsystems):
        A[x_off[i]:x_off[i + 1], x_off[i]:x_off[i + 1]] = sub.A
        B[x_off[i]:x_off[i + 1], u_off[i]:u_off[i + 1]] = sub.B
    for c in net.couplings:
        i = net._index[c.to_id]
        j = net._index[c.from_id]
        if c.A is not None:
            A[x_off[i]:x_off[i + 1], x_off[j]:x_off[j + 1]] = c.A
        if c.B is not None:
            B[x_off[i]:x_off[i + 1], u_off[j]:u_off[j + 1]] = c.B
    def stack(zonos):
        gens = scipy.linalg.block_diag(*[z.generators for z in zonos])
        center = np.concatenate([z.center for z in zonos])
        return Zonotope(center, gens.reshape(center.shape[0], -1))
    Gx = stack([sub.Gx for sub in net.subsystems])
    Gu = stack([sub.Gu for sub in net.subsystems])
    Gd = stack([sub.Gd for sub in net.subsystems])
    return A, B, Gx, Gu, Gd
