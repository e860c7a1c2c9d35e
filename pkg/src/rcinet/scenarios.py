"""Deterministic builders for the three bundled case studies.

Every generator is a pure function of its parameters (and seed, where one
applies): the emitted network documents are byte-identical across runs and
platforms thanks to the in-repo xoshiro random source.
"""

from __future__ import annotations

import math

import numpy as np

from .network import Coupling, NetworkSystem, Subsystem, aggregate
from .rng import SeededRng
from .runtime import NominalTrajectory
from .zonotope import Zonotope


def rotation_matrix(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def gen_rotation(theta: float, n_subsystems: int = 3, alpha: float = 0.8,
                 beta: float = 0.1, u_bound: float = 0.65,
                 d_bound: float = 0.4, x_bound: float = 10.0) -> NetworkSystem:
    """Chain of planar rotation subsystems; adjacent pairs couple both ways.

    theta has no canonical default and must be supplied.  The repo's
    examples and tests use pi/6.
    """
    if n_subsystems < 1:
        raise ValueError("need at least one subsystem")
    A = alpha * rotation_matrix(theta)
    subsystems = [
        Subsystem(
            id=f"s{i + 1}",
            A=A.copy(),
            B=np.eye(2),
            Gx=Zonotope.box([x_bound, x_bound]),
            Gu=Zonotope.box([u_bound, u_bound]),
            Gd=Zonotope.box([d_bound, d_bound]),
        )
        for i in range(n_subsystems)
    ]
    couplings = []
    if beta != 0.0:
        for i in range(n_subsystems - 1):
            a, b = f"s{i + 1}", f"s{i + 2}"
            couplings.append(Coupling(from_id=b, to_id=a, A=beta * np.eye(2)))
            couplings.append(Coupling(from_id=a, to_id=b, A=beta * np.eye(2)))
    metadata = {
        "scenario": "rotation",
        "params": {
            "n_subsystems": n_subsystems,
            "theta": theta,
            "alpha": alpha,
            "beta": beta,
            "u_bound": u_bound,
            "d_bound": d_bound,
            "x_bound": x_bound,
        },
    }
    return NetworkSystem(subsystems=subsystems, couplings=couplings,
                         metadata=metadata)


RED_DYNAMICS = np.array([[1.0, 1.0], [1.0, 2.0]])
BLUE_DYNAMICS = np.array([[1.0, 1.0], [0.0, 1.0]])


def gen_random_field(n_subsystems: int, radius: float, lam: float, seed: int,
                     field_size: float = 100.0, x_bound: float = 10.0,
                     u_bound: float = 10.0, d_bound: float = 0.2) -> NetworkSystem:
    """Random geometric network on a square field.

    Points are uniform on the square; two subsystems couple (both ways) when
    their Euclidean distance is below `radius`, with gain lam/distance on
    the identity.  Even indices get the stiff dynamics class, odd ones the
    integrator class, so the split is even.  Coincident points are resampled
    and recorded in the metadata.
    """
    if n_subsystems < 1 or n_subsystems % 2:
        raise ValueError("subsystem count must be positive and even")
    rng = SeededRng(seed)
    points = [
        np.array([rng.uniform(0.0, field_size), rng.uniform(0.0, field_size)])
        for _ in range(n_subsystems)
    ]
    resampled = []
    for i in range(n_subsystems):
        while any(
            np.hypot(*(points[i] - points[j])) == 0.0 for j in range(i)
        ):
            points[i] = np.array(
                [rng.uniform(0.0, field_size), rng.uniform(0.0, field_size)]
            )
            resampled.append(i)
    subsystems = []
    for i in range(n_subsystems):
        dyn = RED_DYNAMICS if i % 2 == 0 else BLUE_DYNAMICS
        subsystems.append(
            Subsystem(
                id=f"s{i + 1}",
                A=dyn.copy(),
                B=np.array([[0.0], [1.0]]),
                Gx=Zonotope.box([x_bound, x_bound]),
                Gu=Zonotope.box([u_bound]),
                Gd=Zonotope.box([d_bound, d_bound]),
            )
        )
    couplings = []
    edges = []
    for i in range(n_subsystems):
        for j in range(i + 1, n_subsystems):
            dist = float(np.hypot(*(points[i] - points[j])))
            if dist < radius:
                gain = (lam / dist) * np.eye(2)
                couplings.append(
                    Coupling(from_id=f"s{j + 1}", to_id=f"s{i + 1}", A=gain)
                )
                couplings.append(
                    Coupling(from_id=f"s{i + 1}", to_id=f"s{j + 1}", A=gain.copy())
                )
                edges.append([i + 1, j + 1, dist])
    metadata = {
        "scenario": "random_field",
        "seed": seed,
        "params": {
            "n_subsystems": n_subsystems,
            "radius": radius,
            "lambda": lam,
            "field_size": field_size,
            "x_bound": x_bound,
            "u_bound": u_bound,
            "d_bound": d_bound,
        },
        "points": [pt.tolist() for pt in points],
        "classes": ["red" if i % 2 == 0 else "blue" for i in range(n_subsystems)],
        "edges": edges,
        "resampled": resampled,
    }
    return NetworkSystem(subsystems=subsystems, couplings=couplings,
                         metadata=metadata)


DEFAULT_HVAC_ADJACENCY = ((6, 1), (6, 2), (6, 3), (6, 5), (5, 4))


def _normalize_adjacency(adjacency, n_rooms: int) -> list[tuple[int, int]]:
    if adjacency is None:
        adjacency = DEFAULT_HVAC_ADJACENCY
    arr = np.asarray(adjacency)
    if arr.ndim == 2 and arr.shape == (n_rooms, n_rooms):
        if not np.array_equal(arr, arr.T):
            raise ValueError("adjacency matrix must be symmetric")
        if np.any(np.diag(arr) != 0):
            raise ValueError("adjacency matrix must have a zero diagonal")
        pairs = [
            (i + 1, j + 1)
            for i in range(n_rooms)
            for j in range(i + 1, n_rooms)
            if arr[i, j]
        ]
        return pairs
    pairs = []
    seen = set()
    for entry in adjacency:
        i, j = int(entry[0]), int(entry[1])
        if i == j:
            raise ValueError(f"room {i} cannot neighbor itself")
        if not (1 <= i <= n_rooms and 1 <= j <= n_rooms):
            raise ValueError(f"adjacency pair ({i}, {j}) outside 1..{n_rooms}")
        key = (min(i, j), max(i, j))
        if key in seen:
            raise ValueError(f"duplicate adjacency pair ({i}, {j})")
        seen.add(key)
        pairs.append(key)
    # canonical order, so equivalent adjacency inputs emit identical documents
    return sorted(pairs)


def gen_hvac(adjacency=None, delta_tau: float = 900.0,
             heat_capacity: float = 1375.0, r_wall: float = 14.0,
             r_out: float = 50.0, u_box: float = 2.0, d_box: float = 1.6,
             x_box: float = 3.0, n_rooms: int = 6) -> NetworkSystem:
    """Thermal network of scalar rooms around a shared hallway.

    Each room integrates wall exchanges with its neighbors and a loss to the
    outside; the heater gain and the disturbance gain both equal
    delta_tau/heat_capacity, so the raw disturbance band d_box enters the
    dynamics pre-scaled.  The input set is the centered tube band u_box (the
    nominal input absorbs the physical offset: total input = nominal + tube,
    and the nominal must stay u_box away from the physical limits).  The
    resistances are used exactly as given, directly in denominators; either
    unit reading of the wall constants can be explored by swapping the
    parameters.
    """
    pairs = _normalize_adjacency(adjacency, n_rooms)
    gain = delta_tau / heat_capacity
    degrees = [0] * n_rooms
    for i, j in pairs:
        degrees[i - 1] += 1
        degrees[j - 1] += 1
    subsystems = []
    for r in range(n_rooms):
        a_ii = 1.0 - gain * (degrees[r] / r_wall + 1.0 / r_out)
        subsystems.append(
            Subsystem(
                id=f"room{r + 1}",
                A=np.array([[a_ii]]),
                B=np.array([[gain]]),
                Gx=Zonotope.box([x_box]),
                Gu=Zonotope.box([u_box]),
                Gd=Zonotope.box([gain * d_box]),
            )
        )
    a_ij = delta_tau / (r_wall * heat_capacity)
    couplings = []
    for i, j in pairs:
        couplings.append(Coupling(from_id=f"room{j}", to_id=f"room{i}",
                                  A=np.array([[a_ij]])))
        couplings.append(Coupling(from_id=f"room{i}", to_id=f"room{j}",
                                  A=np.array([[a_ij]])))
    metadata = {
        "scenario": "hvac",
        "params": {
            "adjacency": [list(p) for p in pairs],
            "delta_tau": delta_tau,
            "heat_capacity": heat_capacity,
            "r_wall": r_wall,
            "r_out": r_out,
            "u_box": u_box,
            "d_box": d_box,
            "x_box": x_box,
            "n_rooms": n_rooms,
        },
        "units": (
            "delta_tau in seconds, heat_capacity in kJ/K; wall constants are "
            "used directly in denominators, so either resistance reading can "
            "be tested by substituting parameters"
        ),
        "input_offset": {
            "physical_range": [0.0, 9.0],
            "note": (
                "tube inputs are centered; keep the nominal input inside "
                "[u_box, 9 - u_box] so nominal + tube stays physical"
            ),
        },
    }
    return NetworkSystem(subsystems=subsystems, couplings=couplings,
                         metadata=metadata)


def make_hvac_setback_nominal(net: NetworkSystem, steps: int = 96,
                              low_input: float = 2.5, high_input: float = 6.5,
                              day_start: int = 28, day_end: int = 76) -> dict:
    """Setback reference for a scalar-room thermal network.

    The heater input steps from the night level to the day level and back;
    states start at the exact night steady state and integrate the
    disturbance-free dynamics, so the document validates with zero residual.
    Returns the nominal-trajectory JSON document.
    """
    if any(sub.dim != 1 or sub.input_dim != 1 for sub in net.subsystems):
        raise ValueError("setback nominal requires scalar rooms")
    if not (0 <= day_start <= day_end <= steps):
        raise ValueError("need 0 <= day_start <= day_end <= steps")
    A, B, _, _, _ = aggregate(net)
    ids = net.ids
    n = len(ids)

    def input_at(t: int) -> float:
        return high_input if day_start <= t < day_end else low_input

    # exact steady state of the constant night input
    x = np.linalg.solve(np.eye(n) - A, B @ np.full(n, low_input))
    states = [x.copy()]
    inputs = []
    for t in range(steps):
        u = np.full(n, input_at(t))
        inputs.append(u)
        x = A @ x + B @ u
        states.append(x.copy())
    nominal = NominalTrajectory(
        states=[{sid: np.array([st[i]]) for i, sid in enumerate(ids)}
                for st in states],
        inputs=[{sid: np.array([u[i]]) for i, sid in enumerate(ids)}
                for u in inputs],
    )
    return nominal.to_json_dict()
