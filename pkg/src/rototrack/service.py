"""Local HTTP service exposing the tracker to the browser console.

Single-process, threaded stdlib server. One tracking session per session id;
propagation runs as an interruptible background job per session. Re-running
from an edited frame re-initializes the tracker there, so results are
byte-identical to a fresh CLI run started at that frame.
"""
from __future__ import annotations

import json
import re
import threading
import uuid
from dataclasses import fields
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

from .geometry import (CurveError, RotoCurve, curve_doc, curve_doc_string,
                       rasterize_region)
from .imagery import list_frames, load_frame
from .pipeline import ConfigError, RunConfig, track_sequence


class _Cancelled(Exception):
    pass


class Session:
    def __init__(self, sid, config, init_frame, init_curve):
        self.id = sid
        self.config = config
        self.lock = threading.Lock()
        self.curves = {init_frame: init_curve}  # keyframe + edits + results
        self.results = {}   # frame index -> result document
        self.keyframes = {init_frame}
        self.job = None     # (job_id, thread)
        self.cancel = threading.Event()
        self.progress = {"running": False, "done_upto": init_frame,
                         "total": None, "job_id": None, "error": None}


class TrackerService:
    def __init__(self, frames_dir, seed=0):
        self.frame_paths = list_frames(frames_dir)
        if len(self.frame_paths) < 2:
            raise ValueError(f"need at least 2 frames in {frames_dir}")
        self.seed = seed
        first = load_frame(self.frame_paths[0])
        self.width, self.height = first.width, first.height
        self._frames = {0: first}
        self._frames_lock = threading.Lock()
        self.sessions = {}

    def frame(self, index):
        with self._frames_lock:
            if index not in self._frames:
                self._frames[index] = load_frame(self.frame_paths[index])
            return self._frames[index]

    def meta(self):
        return {"frame_count": len(self.frame_paths), "width": self.width,
                "height": self.height}

    def create_session(self, doc):
        curve_spec = doc.get("init_curve")
        if not curve_spec:
            raise ValueError("init_curve required")
        frame_index = int(curve_spec.get("frame_index", 0))
        curve = _parse_curve(curve_spec)
        overrides = doc.get("config", {})
        known = {f.name for f in fields(RunConfig)}
        bad = set(overrides) - known
        if bad:
            raise ValueError(f"unknown config keys: {sorted(bad)}")
        preset = overrides.pop("preset", "full")
        config = RunConfig.from_preset(preset, seed=self.seed, **overrides)
        frame = self.frame(frame_index)
        if not curve.in_bounds(frame.width, frame.height):
            raise ValueError("curve out of bounds")
        if not curve.is_simple():
            raise ValueError("curve self-intersects")
        sid = uuid.uuid4().hex[:12]
        session = Session(sid, config, frame_index, curve)
        mask = rasterize_region(curve, frame.width, frame.height)
        session.results[frame_index] = {
            "frame_index": frame_index,
            "curve": curve_doc(frame_index, curve),
            "document": curve_doc_string(frame_index, curve),
            "energy": None, "iou": None, "is_keyframe": True,
        }
        self.sessions[sid] = session
        return session

    def edit(self, session, frame_index, curve_spec):
        curve = _parse_curve({"vertices": curve_spec})
        frame = self.frame(frame_index)
        if not curve.in_bounds(frame.width, frame.height):
            raise ValueError("curve out of bounds")
        if not curve.is_simple():
            raise ValueError("curve self-intersects")
        self._cancel_job(session)
        with session.lock:
            session.curves[frame_index] = curve
            session.keyframes.add(frame_index)
            # results after the edited frame are stale
            for k in [k for k in session.results if k > frame_index]:
                del session.results[k]
            session.results[frame_index] = {
                "frame_index": frame_index,
                "curve": curve_doc(frame_index, curve),
                "document": curve_doc_string(frame_index, curve),
                "energy": None, "iou": None, "is_keyframe": True,
            }
            session.progress["done_upto"] = frame_index
        return {"ok": True, "frame_index": frame_index}

    def propagate(self, session, from_frame):
        self._cancel_job(session)
        with session.lock:
            if from_frame is None:
                from_frame = max(session.keyframes)
            from_frame = int(from_frame)
            if from_frame not in session.curves:
                raise ValueError(f"no curve known at frame {from_frame}")
            job_id = uuid.uuid4().hex[:8]
            session.cancel = threading.Event()
            session.progress = {
                "running": True, "done_upto": from_frame,
                "total": len(self.frame_paths) - 1 - from_frame,
                "job_id": job_id, "error": None}
            thread = threading.Thread(
                target=self._run_job, args=(session, from_frame, job_id),
                daemon=True)
            session.job = (job_id, thread)
        thread.start()
        return {"job_id": job_id, "from_frame": from_frame}

    def _run_job(self, session, from_frame, job_id):
        cancel = session.cancel
        try:
            init_curve = session.curves[from_frame]
            frames = [self.frame(i)
                      for i in range(from_frame, len(self.frame_paths))]

            def on_result(result):
                if cancel.is_set():
                    raise _Cancelled()
                with session.lock:
                    session.curves[result.frame_index] = result.curve
                    session.results[result.frame_index] = {
                        "frame_index": result.frame_index,
                        "curve": curve_doc(result.frame_index, result.curve),
                        "document": curve_doc_string(result.frame_index,
                                                     result.curve),
                        "energy": result.energy.to_dict(),
                        "iou": result.iou,
                        "flags": list(result.flags),
                        "landmarks": [list(p) for p in result.landmarks],
                        "is_keyframe": False,
                    }
                    session.progress["done_upto"] = result.frame_index

            track_sequence(frames, init_curve, session.config,
                           progress=on_result, start_index=from_frame)
            with session.lock:
                session.progress["running"] = False
        except _Cancelled:
            with session.lock:
                session.progress["running"] = False
        except Exception as exc:  # surfaced through /progress
            with session.lock:
                session.progress["running"] = False
                session.progress["error"] = str(exc)

    def _cancel_job(self, session):
        job = session.job
        if job is None:
            return
        session.cancel.set()
        job[1].join(timeout=30.0)
        session.job = None


def _parse_curve(spec) -> RotoCurve:
    verts = spec.get("vertices") if isinstance(spec, dict) else spec
    try:
        arr = np.array(verts, dtype=np.int64)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"bad vertices: {exc}") from exc
    try:
        return RotoCurve(arr)
    except CurveError as exc:
        raise ValueError(str(exc)) from exc


def make_handler(service: TrackerService):
    routes_get = [
        (re.compile(r"^/meta$"), "meta"),
        (re.compile(r"^/frames/(\d+)$"), "frame"),
        (re.compile(r"^/sessions/(\w+)/results/(\d+)$"), "result"),
        (re.compile(r"^/sessions/(\w+)/progress$"), "progress"),
    ]

    class Handler(BaseHTTPRequestHandler):
        def log_message(self, *a):
            pass

        def _send(self, code, payload, content_type="application/json"):
            body = (json.dumps(payload).encode()
                    if content_type == "application/json" else payload)
            self.send_response(code)
            self.send_header("Content-Type", content_type)
            self.send_header("Content-Length", str(len(body)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Access-Control-Allow-Headers", "Content-Type")
            self.send_header("Access-Control-Allow-Methods",
                             "GET, POST, OPTIONS")
            self.end_headers()
            self.wfile.write(body)

        def do_OPTIONS(self):
            self._send(204, b"", content_type="application/octet-stream")

        def _session(self, sid):
            session = service.sessions.get(sid)
            if session is None:
                self._send(404, {"error": f"unknown session {sid}"})
            return session

        def do_GET(self):
            try:
                if self.path == "/meta":
                    return self._send(200, service.meta())
                m = re.match(r"^/frames/(\d+)$", self.path)
                if m:
                    idx = int(m.group(1))
                    if not 0 <= idx < len(service.frame_paths):
                        return self._send(404, {"error": "no such frame"})
                    with open(service.frame_paths[idx], "rb") as fh:
                        return self._send(200, fh.read(), "image/png")
                m = re.match(r"^/sessions/(\w+)/results/(\d+)$", self.path)
                if m:
                    session = self._session(m.group(1))
                    if session is None:
                        return None
                    with session.lock:
                        doc = session.results.get(int(m.group(2)))
                    if doc is None:
                        return self._send(404, {"error": "result not ready"})
                    return self._send(200, doc)
                m = re.match(r"^/sessions/(\w+)/progress$", self.path)
                if m:
                    session = self._session(m.group(1))
                    if session is None:
                        return None
                    with session.lock:
                        return self._send(200, dict(session.progress))
                self._send(404, {"error": f"no route {self.path}"})
            except Exception as exc:
                self._send(500, {"error": str(exc)})

        def do_POST(self):
            try:
                length = int(self.headers.get("Content-Length", 0))
                doc = json.loads(self.rfile.read(length) or b"{}")
                if self.path == "/sessions":
                    session = service.create_session(doc)
                    with session.lock:
                        first = min(session.results)
                        return self._send(200, {
                            "session_id": session.id,
                            "result": session.results[first]})
                m = re.match(r"^/sessions/(\w+)/propagate$", self.path)
                if m:
                    session = self._session(m.group(1))
                    if session is None:
                        return None
                    out = service.propagate(session, doc.get("from_frame"))
                    return self._send(200, out)
                m = re.match(r"^/sessions/(\w+)/edit$", self.path)
                if m:
                    session = self._session(m.group(1))
                    if session is None:
                        return None
                    out = service.edit(session, int(doc["frame"]),
                                       doc["curve"])
                    return self._send(200, out)
                self._send(404, {"error": f"no route {self.path}"})
            except (ValueError, ConfigError, KeyError) as exc:
                self._send(400, {"error": str(exc)})
            except Exception as exc:
                self._send(500, {"error": str(exc)})

    return Handler


def make_server(frames_dir, port, seed=0):
    service = TrackerService(frames_dir, seed=seed)
    server = ThreadingHTTPServer(("127.0.0.1", port), make_handler(service))
    return server, service


def serve_forever(frames_dir, port, seed=0) -> int:
    server, service = make_server(frames_dir, port, seed)
    print(f"serving {len(service.frame_paths)} frames on "
          f"http://127.0.0.1:{port}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0
