"""Sequential embedding environment: masked actions, rewards, wire protocol.

An episode embeds the nodes of one logical graph into one hardware graph,
one node per step, and ends after exactly node_count steps with a
feasible embedding. The reward for a step is the negated qubit growth,
optionally minus a squared index distance to a guide order faded by the
coefficient sigma.

The same environment is exposed in process and as a line-delimited JSON
service over a byte stream, one request object per line.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .embedding import Embedding, state_transition
from .graphs import HardwareGraph, LogicalGraph, load_graph

__all__ = [
    "EnvState",
    "TransitionRecord",
    "EmbeddingEnv",
    "IllegalActionError",
    "action_mask",
    "encode_message",
    "decode_message",
    "serve",
]


class IllegalActionError(ValueError):
    """Raised when a step names an already-embedded node."""


@dataclass(frozen=True)
class EnvState:
    """Snapshot of one episode step.

    ``chains`` lists (logical node, chain) pairs sorted by node;
    ``hw_features`` holds the owning logical node per hardware qubit and
    -1 for free qubits; ``step_index`` counts completed transitions.
    """

    logical: LogicalGraph
    hardware: HardwareGraph
    chains: tuple[tuple[int, tuple[int, ...]], ...]
    hw_features: tuple[int, ...]
    step_index: int

    @property
    def qubits(self) -> int:
        return sum(len(c) for _, c in self.chains)

    @property
    def embedded(self) -> frozenset[int]:
        return frozenset(v for v, _ in self.chains)

    def mask(self) -> list[bool]:
        done = self.embedded
        return [v not in done for v in range(self.logical.node_count)]

    def chain_matrix(self) -> np.ndarray:
        """Dense {0,1} incidence of hardware nodes to chains."""
        m = np.zeros((self.hardware.node_count, self.logical.node_count), dtype=np.int8)
        for v, chain in self.chains:
            for u in chain:
                m[u, v] = 1
        return m

    def logical_features(self) -> np.ndarray:
        return np.ones((self.logical.node_count, 1), dtype=np.float64)


def action_mask(state: EnvState) -> list[bool]:
    """True exactly on unembedded logical nodes."""
    return state.mask()


@dataclass(frozen=True)
class TransitionRecord:
    state: EnvState
    action: int
    reward: float
    next_state: EnvState
    done: bool

    def __post_init__(self):
        expected = self.next_state.step_index == self.state.logical.node_count
        if self.done != expected:
            raise ValueError("done flag inconsistent with the step count")


class EmbeddingEnv:
    """One episode at a time; transitions are deterministic given the action."""

    def __init__(self) -> None:
        self._logical: LogicalGraph | None = None
        self._hardware: HardwareGraph | None = None
        self._phi: Embedding | None = None
        self._t = 0
        self._sigma = 1.0
        self._guide: tuple[int, ...] | None = None

    def reset(
        self,
        logical: LogicalGraph,
        hardware: HardwareGraph,
        guide: "tuple[int, ...] | list[int] | None" = None,
        sigma: float = 1.0,
    ) -> EnvState:
        if guide is not None:
            guide = tuple(guide)
            if sorted(guide) != list(range(logical.node_count)):
                raise ValueError("guide must be a permutation of the logical nodes")
        if not 0.0 <= sigma <= 1.0:
            raise ValueError("sigma must lie in [0, 1]")
        self._logical = logical
        self._hardware = hardware
        self._phi = Embedding()
        self._t = 0
        self._sigma = float(sigma)
        self._guide = guide
        return self._snapshot()

    def _snapshot(self) -> EnvState:
        assert self._logical is not None and self._hardware is not None and self._phi is not None
        features = [-1] * self._hardware.node_count
        for u, v in self._phi.reverse.items():
            features[u] = v
        chains = tuple((v, tuple(c)) for v, c in sorted(self._phi.chains.items()))
        return EnvState(self._logical, self._hardware, chains, tuple(features), self._t)

    def action_mask(self) -> list[bool]:
        if self._logical is None or self._phi is None:
            raise RuntimeError("reset the environment first")
        return [v not in self._phi.chains for v in range(self._logical.node_count)]

    @property
    def done(self) -> bool:
        return self._logical is not None and self._t >= self._logical.node_count

    def step(self, action: int) -> tuple[EnvState, float, bool]:
        if self._logical is None or self._phi is None or self._hardware is None:
            raise RuntimeError("reset the environment first")
        if self.done:
            raise IllegalActionError("episode is already done")
        if not (0 <= action < self._logical.node_count) or action in self._phi.chains:
            raise IllegalActionError(f"action {action} is masked out")
        before = self._phi.size
        self._phi = state_transition(self._logical, self._hardware, self._phi, action)
        reward = -float(self._phi.size - before)
        if self._guide is not None:
            slack = max(0.0, 1.0 - self._sigma)
            reward -= slack * float(action - self._guide[self._t]) ** 2
        self._t += 1
        return self._snapshot(), reward, self.done


# --- wire protocol ---------------------------------------------------------


def encode_message(obj: dict) -> str:
    """Canonical one-line JSON encoding (sorted keys, no spaces)."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def decode_message(line: str) -> dict:
    obj = json.loads(line)
    if not isinstance(obj, dict):
        raise ValueError("message must be a JSON object")
    return obj


def _state_payload(state: EnvState, reward: float, done: bool) -> dict:
    return {
        "ok": True,
        "t": state.step_index,
        "reward": reward,
        "done": done,
        "qubits": state.qubits,
        "hw_features": [[u, o] for u, o in enumerate(state.hw_features) if o >= 0],
        "chains": [[v, list(c)] for v, c in state.chains],
        "mask": state.mask(),
    }


def _parse_logical(spec: dict) -> LogicalGraph:
    if "path" in spec:
        return load_graph(spec["path"])
    return LogicalGraph(int(spec["n"]), [(int(u), int(v)) for u, v in spec.get("edges", [])])


def serve(infile, outfile) -> None:
    """Request loop over line-delimited JSON; one episode at a time.

    Malformed requests produce an error reply and the session continues;
    the loop ends on a close command or end of input.
    """
    env = EmbeddingEnv()
    state: EnvState | None = None

    def reply(obj: dict) -> None:
        outfile.write(encode_message(obj) + "\n")
        outfile.flush()

    for raw in infile:
        line = raw.strip()
        if not line:
            continue
        try:
            msg = decode_message(line)
        except ValueError:
            reply({"ok": False, "error": "bad_request"})
            continue
        cmd = msg.get("cmd")
        try:
            if cmd == "reset":
                logical = _parse_logical(msg["logical"])
                hw_spec = msg["hardware"]
                hardware = HardwareGraph(int(hw_spec["m"]), int(hw_spec["n"]), int(hw_spec["l"]))
                guide = msg.get("guide")
                sigma = float(msg.get("sigma", 1.0))
                state = env.reset(logical, hardware, guide, sigma)
                reply(_state_payload(state, 0.0, False))
            elif cmd == "step":
                if state is None:
                    reply({"ok": False, "error": "no_episode"})
                    continue
                try:
                    state, reward, done = env.step(int(msg["action"]))
                except IllegalActionError:
                    reply({"ok": False, "error": "illegal_action"})
                    continue
                reply(_state_payload(state, reward, done))
            elif cmd == "mask":
                if state is None:
                    reply({"ok": False, "error": "no_episode"})
                    continue
                reply({"ok": True, "t": state.step_index, "mask": env.action_mask()})
            elif cmd == "close":
                reply({"ok": True})
                return
            else:
                reply({"ok": False, "error": "unknown_cmd"})
        except (KeyError, TypeError, ValueError):
            reply({"ok": False, "error": "bad_request"})
