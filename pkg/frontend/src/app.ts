import { ApiError, TrackerClient } from "./api.js";
import { PolygonEditor } from "./polygon.js";
import { drawCurve, drawLandmarks, highlightEdges } from "./overlay.js";
import { drawSeries } from "./plot.js";
import { Meta, Point, ResultDoc } from "./schema.js";

type Mode = "draw" | "view" | "edit";

interface SessionView {
  sessionId: string | null;
  frame: number;
  results: Map<number, ResultDoc>;
  editBuffer: PolygonEditor | null;
  editDirty: boolean;
  running: boolean;
}

const $ = <T extends HTMLElement>(id: string): T =>
  document.getElementById(id) as T;

class ConsoleApp {
  client: TrackerClient;
  meta!: Meta;
  view: SessionView = {
    sessionId: null,
    frame: 0,
    results: new Map(),
    editBuffer: null,
    editDirty: false,
    running: false,
  };
  mode: Mode = "draw";
  editor: PolygonEditor | null = null;
  dragIndex = -1;
  frameCache = new Map<number, HTMLImageElement>();
  crossing: [number, number] | null = null;

  constructor(base: string) {
    this.client = new TrackerClient(base);
  }

  async start(): Promise<void> {
    this.meta = await this.client.meta();
    const canvas = $<HTMLCanvasElement>("frame-canvas");
    canvas.width = this.meta.width;
    canvas.height = this.meta.height;
    const scrub = $<HTMLInputElement>("scrubber");
    scrub.max = String(this.meta.frame_count - 1);
    this.editor = new PolygonEditor(this.meta.width, this.meta.height);
    this.banner(`loaded ${this.meta.frame_count} frames `
      + `(${this.meta.width}x${this.meta.height}); click to outline the `
      + `object on frame 0, click the first vertex to close`);
    this.bind();
    const url = new URL(window.location.href);
    const sid = url.searchParams.get("session");
    if (sid) {
      this.view.sessionId = sid;
      this.mode = "view";
      await this.refreshAll();
    }
    await this.render();
  }

  bind(): void {
    const canvas = $<HTMLCanvasElement>("frame-canvas");
    canvas.addEventListener("mousedown", (ev) => this.onDown(ev));
    canvas.addEventListener("mousemove", (ev) => this.onMove(ev));
    canvas.addEventListener("mouseup", () => (this.dragIndex = -1));
    window.addEventListener("keydown", (ev) => {
      if (ev.key === "Enter" && this.mode === "draw") this.tryClose();
    });
    $("scrubber").addEventListener("input", async (ev) => {
      this.view.frame = Number((ev.target as HTMLInputElement).value);
      await this.render();
    });
    $("btn-run").addEventListener("click", () => void this.run());
    $("btn-edit").addEventListener("click", () => this.enterEdit());
    $("btn-repropagate").addEventListener("click", () => void this.repropagate());
    $("btn-reset").addEventListener("click", () => {
      this.editor?.reset();
      this.crossing = null;
      this.mode = "draw";
      void this.render();
    });
  }

  canvasPoint(ev: MouseEvent): Point {
    const canvas = $<HTMLCanvasElement>("frame-canvas");
    const rect = canvas.getBoundingClientRect();
    const x = ((ev.clientX - rect.left) / rect.width) * canvas.width;
    const y = ((ev.clientY - rect.top) / rect.height) * canvas.height;
    return [Math.round(x), Math.round(y)];
  }

  private nearestVertex(verts: Point[], x: number, y: number): number {
    let best = -1;
    let bestD = 8;
    verts.forEach((v, i) => {
      const d = Math.hypot(v[0] - x, v[1] - y);
      if (d < bestD) {
        best = i;
        bestD = d;
      }
    });
    return best;
  }

  onDown(ev: MouseEvent): void {
    const [x, y] = this.canvasPoint(ev);
    if (this.mode === "draw" && this.editor) {
      if (this.editor.closed) {
        // adjust a closed outline by dragging its vertices before Run
        this.dragIndex = this.nearestVertex(this.editor.vertices, x, y);
        return;
      }
      const out = this.editor.addPoint(x, y);
      if (out.kind === "rejected" && out.crossing) {
        this.crossing = out.crossing;
        this.banner(`cannot close: edges ${out.crossing[0]} and `
          + `${out.crossing[1]} cross`);
      } else if (out.kind === "closed") {
        this.crossing = null;
        this.banner("outline closed; press Run (drag vertices to adjust)");
      }
      void this.render();
      return;
    }
    if (this.mode === "edit" && this.view.editBuffer) {
      this.dragIndex = this.nearestVertex(this.view.editBuffer.vertices, x, y);
    }
  }

  onMove(ev: MouseEvent): void {
    if (this.dragIndex < 0) return;
    const target = this.mode === "edit" ? this.view.editBuffer
      : this.mode === "draw" ? this.editor : null;
    if (!target?.closed) return;
    const [x, y] = this.canvasPoint(ev);
    const out = target.dragVertex(this.dragIndex, x, y);
    if (out.kind === "moved" && this.mode === "edit") {
      this.view.editDirty = true;
    }
    void this.render();
  }

  tryClose(): void {
    if (!this.editor) return;
    const out = this.editor.close();
    if (out.kind === "rejected") {
      this.crossing = out.crossing ?? null;
      this.banner(out.reason);
    } else {
      this.crossing = null;
      this.banner("outline closed; press Run");
    }
    void this.render();
  }

  async run(): Promise<void> {
    if (!this.editor?.closed) {
      this.banner("close the outline first");
      return;
    }
    try {
      const doc = this.editor.toDocument(0);
      const created = await this.client.createSession(doc, {});
      this.view.sessionId = created.session_id;
      this.view.results.clear();
      this.view.results.set(0, created.result);
      const url = new URL(window.location.href);
      url.searchParams.set("session", created.session_id);
      window.history.replaceState(null, "", url.toString());
      this.mode = "view";
      await this.propagateFrom(0);
    } catch (err) {
      this.banner(this.describe(err));
    }
  }

  enterEdit(): void {
    const doc = this.view.results.get(this.view.frame);
    if (!doc) {
      this.banner("no curve at this frame yet");
      return;
    }
    const editor = new PolygonEditor(this.meta.width, this.meta.height);
    editor.loadClosed(doc.curve.vertices);
    this.view.editBuffer = editor;
    this.view.editDirty = false;
    this.mode = "edit";
    this.banner(`editing frame ${this.view.frame}: drag vertices, then `
      + `Re-propagate`);
    void this.render();
  }

  async repropagate(): Promise<void> {
    if (!this.view.sessionId || !this.view.editBuffer) return;
    const frame = this.view.frame;
    try {
      await this.client.edit(this.view.sessionId, frame,
        this.view.editBuffer.vertices);
      for (const k of [...this.view.results.keys()]) {
        if (k > frame) this.view.results.delete(k);
      }
      const edited = this.view.editBuffer;
      this.view.results.set(frame, {
        frame_index: frame,
        curve: edited.toDocument(frame),
        document: "",
        energy: null,
        iou: null,
        is_keyframe: true,
      });
      this.mode = "view";
      this.view.editBuffer = null;
      await this.propagateFrom(frame);
    } catch (err) {
      this.banner(this.describe(err));
    }
  }

  async propagateFrom(frame: number): Promise<void> {
    if (!this.view.sessionId) return;
    this.view.running = true;
    this.banner("propagating...");
    try {
      await this.client.propagate(this.view.sessionId, frame);
      await this.client.pollUntilDone(this.view.sessionId, frame, (doc) => {
        this.view.results.set(doc.frame_index, doc);
        this.view.frame = doc.frame_index;
        $<HTMLInputElement>("scrubber").value = String(doc.frame_index);
        this.banner(`frame ${doc.frame_index}/${this.meta.frame_count - 1}`
          + (doc.flags?.length ? ` [${doc.flags.join(", ")}]` : ""));
        void this.render();
      });
      this.banner("propagation complete");
    } catch (err) {
      this.banner(this.describe(err));
    } finally {
      this.view.running = false;
      await this.render();
    }
  }

  async refreshAll(): Promise<void> {
    if (!this.view.sessionId) return;
    for (let i = 0; i < this.meta.frame_count; i++) {
      const doc = await this.client.result(this.view.sessionId, i);
      if (doc) this.view.results.set(i, doc);
    }
  }

  describe(err: unknown): string {
    if (err instanceof ApiError) return `server error: ${err.message}`;
    return `server unreachable: ${String(err)}`;
  }

  banner(text: string): void {
    $("banner").textContent = text;
  }

  loadFrame(index: number): Promise<HTMLImageElement> {
    const hit = this.frameCache.get(index);
    if (hit) return Promise.resolve(hit);
    return new Promise((resolve, reject) => {
      const img = new Image();
      img.onload = () => {
        this.frameCache.set(index, img);
        resolve(img);
      };
      img.onerror = reject;
      img.src = this.client.frameUrl(index);
    });
  }

  async render(): Promise<void> {
    const canvas = $<HTMLCanvasElement>("frame-canvas");
    const ctx = canvas.getContext("2d");
    if (!ctx) return;
    const frame = this.mode === "draw" ? 0 : this.view.frame;
    try {
      const img = await this.loadFrame(frame);
      ctx.drawImage(img, 0, 0);
    } catch {
      ctx.fillStyle = "#222";
      ctx.fillRect(0, 0, canvas.width, canvas.height);
    }
    if (this.mode === "draw" && this.editor) {
      drawCurve(ctx, this.editor.vertices, this.editor.closed, true);
      if (this.crossing) {
        highlightEdges(ctx, this.editor.vertices, this.crossing);
      }
    } else if (this.mode === "edit" && this.view.editBuffer) {
      drawCurve(ctx, this.view.editBuffer.vertices, true, true);
    } else {
      const doc = this.view.results.get(frame);
      if (doc) {
        drawCurve(ctx, doc.curve.vertices, true, false);
        if (doc.landmarks) drawLandmarks(ctx, doc.landmarks);
        const badge = doc.flags?.length ? ` [${doc.flags.join(",")}]` : "";
        $("frame-label").textContent =
          `frame ${frame}${doc.is_keyframe ? " (keyframe)" : ""}${badge}`;
      } else {
        $("frame-label").textContent = `frame ${frame} (no result)`;
      }
    }
    const count = this.meta.frame_count;
    const energies: (number | null)[] = [];
    const ious: (number | null)[] = [];
    for (let i = 0; i < count; i++) {
      const doc = this.view.results.get(i);
      energies.push(doc?.energy ? doc.energy.total : null);
      ious.push(doc?.iou ?? null);
    }
    drawSeries($<HTMLCanvasElement>("plot-energy"), energies, frame,
      "#57b6ff", "energy");
    drawSeries($<HTMLCanvasElement>("plot-iou"), ious, frame,
      "#27e07d", "IoU");
  }
}

const base = new URL(window.location.href).searchParams.get("api")
  ?? "http://127.0.0.1:8765";
const app = new ConsoleApp(base);
app.start().catch((err) => {
  const banner = document.getElementById("banner");
  if (banner) banner.textContent = `cannot reach service at ${base}: ${err}`;
});

export { ConsoleApp };
