"""
Co-simulation bridge
- Newline-delimited JSON over stdio or TCP, protocol "gelmpm/1"
- An external main simulator drives the indenter by velocity or position
- Replies carry step index, indentation depth, terminal flag, optional image path

Messages (one JSON object per line):
    {"type": "init", "config": {...}, "object": "sphere" | "cloud_path": "...",
     "terminal": {"max_depth": 0.001, "max_steps": 500}, "output_dir": "...",
     "gap": 0.0, "press_xy": [0, 0]}
    {"type": "step", "mode": "velocity" | "position", "vector": [vx, vy, vz],
     "sim_time": 0.001, "request_image": false}
    {"type": "end"}
"""

import json
import logging
import math
import socketserver
import sys
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional

import numpy as np

import config
from core import shapes
from core.errors import GelSimError, NonMonotonicTime, ProtocolError, SessionNotInitialized
from core.geometry import load_point_cloud
from core.scene_config import SceneConfig
from core.simulator import TactileSimulator
from data.storage import RunStorage

logger = logging.getLogger(__name__)


class CommandMode(str, Enum):
    VELOCITY = "velocity"
    POSITION = "position"


@dataclass(frozen=True)
class StepCommand:
    """VELOCITY vectors are m/s; POSITION vectors are displacements (m) from the initial pose"""

    mode: CommandMode
    vector: tuple
    sim_time: float
    request_image: bool = False

    @classmethod
    def from_message(cls, message):
        try:
            mode = CommandMode(str(message.get("mode", "velocity")).lower())
        except ValueError:
            raise ProtocolError(f"unknown step mode '{message.get('mode')}'", message)
        vector = message.get("vector")
        if not isinstance(vector, (list, tuple)) or len(vector) != 3:
            raise ProtocolError("step 'vector' must be a list of 3 numbers", message)
        try:
            vector = tuple(float(v) for v in vector)
            sim_time = float(message.get("sim_time", 0.0))
        except (TypeError, ValueError):
            raise ProtocolError("step 'vector' and 'sim_time' must be numeric", message)
        if not all(math.isfinite(v) for v in vector) or not math.isfinite(sim_time):
            raise ProtocolError("step 'vector' and 'sim_time' must be finite", message)
        return cls(mode=mode, vector=vector, sim_time=sim_time, request_image=bool(message.get("request_image", False)))


@dataclass(frozen=True)
class TerminalCondition:
    max_depth: Optional[float] = None
    max_steps: Optional[int] = None

    # float accumulation of per-step travel
    DEPTH_TOLERANCE = 1e-9

    def __post_init__(self):
        if self.max_depth is None and self.max_steps is None:
            raise ProtocolError("terminal condition needs max_depth or max_steps")

    def reached(self, depth, steps):
        if self.max_depth is not None and depth >= self.max_depth - self.DEPTH_TOLERANCE:
            return True
        return self.max_steps is not None and steps >= self.max_steps

    @classmethod
    def from_message(cls, data):
        data = data or {}
        max_depth = data.get("max_depth")
        max_steps = data.get("max_steps")
        return cls(
            max_depth=None if max_depth is None else float(max_depth),
            max_steps=None if max_steps is None else int(max_steps),
        )


@dataclass(frozen=True)
class StepReply:
    step: int
    depth: float
    terminal: bool
    sim_time: float
    image: Optional[str] = None

    def to_message(self):
        return {
            "type": "step",
            "step": self.step,
            "depth": self.depth,
            "terminal": self.terminal,
            "sim_time": self.sim_time,
            "image": self.image,
        }


class BridgeSession:
    """State of one init -> steps -> end exchange"""

    def __init__(self, base_scene=None, output_root=None):
        self.base_scene = base_scene or SceneConfig()
        self.output_root = Path(output_root) if output_root else Path(self.base_scene.output_dir) / "sessions"
        self.simulator = None
        self.storage = None
        self.terminal_condition = None
        self.step_index = 0
        self.last_sim_time = None
        self.terminal = False
        self.depth = 0.0
        self.last_image = None

    @property
    def initialized(self):
        return self.simulator is not None

    def _load_cloud(self, message, scene):
        cloud_path = message.get("cloud_path") or scene.indenter.cloud_path
        object_name = message.get("object")
        if object_name and not message.get("cloud_path"):
            if object_name not in shapes.SHAPES:
                raise ProtocolError(f"unknown object '{object_name}'", message)
            return shapes.generate_object(object_name, count=scene.indenter.target_count, seed=scene.indenter.seed)
        if not cloud_path:
            raise ProtocolError("init needs 'object' or 'cloud_path'", message)
        return load_point_cloud(cloud_path)

    def init(self, message):
        scene = self.base_scene.with_overrides(message.get("config") or {})
        scene.validate()
        cloud = self._load_cloud(message, scene)

        terminal_condition = TerminalCondition.from_message(message.get("terminal"))
        simulator = TactileSimulator(
            scene,
            indenter_cloud=cloud,
            press_xy=tuple(message.get("press_xy", (0.0, 0.0))),
            gap=float(message.get("gap", 0.0)),
            object_name=message.get("object"),
        )
        session_dir = message.get("output_dir") or (self.output_root / (message.get("object") or "session"))
        storage = RunStorage(session_dir).ensure_directories()
        storage.save_config(scene)
        storage.start_step_log()

        # nothing above touched the running session
        self.terminal_condition = terminal_condition
        self.simulator = simulator
        self.storage = storage
        self.step_index = 0
        self.last_sim_time = None
        self.terminal = False
        self.depth = 0.0
        self.last_image = None
        logger.info(f"Bridge session initialized in {self.storage.run_dir}")
        return {
            "type": "ready",
            "protocol": config.PROTOCOL_VERSION,
            "n_particles": self.simulator.state.n_particles,
            "n_substeps": self.simulator.state.n_substeps,
            "dt_control": self.simulator.control_dt,
            "session_dir": str(self.storage.run_dir),
        }

    def command_velocity(self, cmd):
        vector = np.asarray(cmd.vector, dtype=np.float64)
        if cmd.mode is CommandMode.VELOCITY:
            return vector
        return (vector - self.simulator.offset) / self.simulator.control_dt

    def step(self, cmd):
        if not self.initialized:
            raise SessionNotInitialized("step received before init")
        if self.last_sim_time is not None and cmd.sim_time < self.last_sim_time:
            raise NonMonotonicTime(f"sim_time {cmd.sim_time} precedes {self.last_sim_time}")
        self.last_sim_time = cmd.sim_time

        if self.terminal:
            image = self.last_image if cmd.request_image else None
            return StepReply(step=self.step_index, depth=self.depth, terminal=True, sim_time=cmd.sim_time, image=image)

        velocity = self.command_velocity(cmd)
        self.simulator.advance(velocity)
        self.step_index += 1
        self.depth = self.simulator.indentation
        self.terminal = self.terminal_condition.reached(self.depth, self.step_index)

        image_path = None
        if cmd.request_image:
            image, depth_map = self.simulator.capture()
            name = f"step_{self.step_index:05d}_depth_{self.depth * 1e6:06.0f}um"
            image_path = str(self.storage.save_image(name, image))
            self.storage.save_depth(name, depth_map)
            self.last_image = image_path

        self.storage.append_step_log({
            "step": self.step_index,
            "sim_time": cmd.sim_time,
            "mode": cmd.mode.value,
            "velocity": velocity.tolist(),
            "depth": self.depth,
            "terminal": self.terminal,
            "image": image_path,
        })
        logger.debug(f"bridge step {self.step_index}: depth={self.depth:.6e} terminal={self.terminal}")
        return StepReply(
            step=self.step_index, depth=self.depth, terminal=self.terminal, sim_time=cmd.sim_time, image=image_path
        )

    def end(self):
        logger.info(f"Bridge session ended after {self.step_index} steps")
        return {"type": "bye", "steps": self.step_index}


def handle_command(session, cmd):
    return session.step(cmd)


def error_reply(error, echo=None):
    return {
        "type": "error",
        "error": type(error).__name__,
        "message": str(error),
        "echo": echo,
    }


def handle_message(session, line):
    """One request line in, one reply dict out; errors become error replies"""
    try:
        try:
            message = json.loads(line)
        except json.JSONDecodeError as e:
            raise ProtocolError(f"malformed JSON ({e.msg})", line)
        if not isinstance(message, dict):
            raise ProtocolError("message must be a JSON object", line)

        kind = message.get("type")
        if kind == "init":
            protocol = message.get("protocol", config.PROTOCOL_VERSION)
            if protocol != config.PROTOCOL_VERSION:
                raise ProtocolError(f"unsupported protocol '{protocol}'", line)
            return session.init(message)
        if kind == "step":
            return handle_command(session, StepCommand.from_message(message)).to_message()
        if kind == "end":
            return session.end()
        raise ProtocolError(f"unknown message type '{kind}'", line)
    except GelSimError as e:
        logger.warning(f"Bridge error: {type(e).__name__}: {e}")
        return error_reply(e, echo=line)
    except (ValueError, TypeError, KeyError, OSError) as e:
        logger.warning(f"Bridge request failed: {type(e).__name__}: {e}")
        return error_reply(e, echo=line)


def serve_stream(session, lines, write):
    """Serve one session over an iterable of lines; stops after 'end' or EOF"""
    for raw in lines:
        line = raw.strip()
        if not line:
            continue
        reply = handle_message(session, line)
        write(json.dumps(reply) + "\n")
        if reply["type"] == "bye":
            return True
    return False


class _SessionHandler(socketserver.StreamRequestHandler):
    def handle(self):
        session = BridgeSession(self.server.base_scene, self.server.output_root)
        logger.info(f"Bridge client connected: {self.client_address}")
        lines = (raw.decode("utf-8", errors="replace") for raw in self.rfile)

        def write(text):
            self.wfile.write(text.encode("utf-8"))
            self.wfile.flush()

        serve_stream(session, lines, write)


def make_tcp_server(host, port, base_scene=None, output_root=None):
    """Single-threaded server; one session per connection, one connection at a time"""
    socketserver.TCPServer.allow_reuse_address = True
    server = socketserver.TCPServer((host, int(port)), _SessionHandler)
    server.base_scene = base_scene
    server.output_root = output_root
    return server


def parse_endpoint(endpoint):
    """'stdio' or 'HOST:PORT' -> None or (host, port)"""
    if endpoint in (None, "stdio", "-"):
        return None
    if isinstance(endpoint, (tuple, list)):
        return str(endpoint[0]), int(endpoint[1])
    host, _, port = str(endpoint).rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"Endpoint must be 'stdio' or HOST:PORT (got '{endpoint}')")
    return host, int(port)


def run_session(endpoint="stdio", base_scene=None, output_root=None):
    address = parse_endpoint(endpoint)
    if address is None:
        session = BridgeSession(base_scene, output_root)
        logger.info("Bridge serving on stdio")

        def write(text):
            sys.stdout.write(text)
            sys.stdout.flush()

        serve_stream(session, sys.stdin, write)
        return

    with make_tcp_server(*address, base_scene=base_scene, output_root=output_root) as server:
        logger.info(f"Bridge listening on {address[0]}:{server.server_address[1]}")
        try:
            server.serve_forever()
        except KeyboardInterrupt:
            logger.info("Bridge server stopped")
