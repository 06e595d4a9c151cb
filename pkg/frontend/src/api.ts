import { CurveDocument, Meta, Point, Progress, ResultDoc } from "./schema.js";

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

async function asJson(resp: Response): Promise<any> {
  if (!resp.ok) {
    let detail = resp.statusText;
    try {
      detail = ((await resp.json()) as { error?: string }).error ?? detail;
    } catch {
      /* non-JSON error body */
    }
    throw new ApiError(resp.status, detail);
  }
  return resp.json();
}

/** Thin client over the tracker service; no state is kept server results. */
export class TrackerClient {
  constructor(readonly base: string, readonly fetchFn: typeof fetch = fetch) {}

  private url(path: string): string {
    return this.base.replace(/\/$/, "") + path;
  }

  meta(): Promise<Meta> {
    return this.fetchFn(this.url("/meta")).then(asJson);
  }

  frameUrl(index: number): string {
    return this.url(`/frames/${index}`);
  }

  createSession(
    curve: CurveDocument,
    config: Record<string, unknown> = {},
  ): Promise<{ session_id: string; result: ResultDoc }> {
    return this.fetchFn(this.url("/sessions"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ init_curve: curve, config }),
    }).then(asJson);
  }

  propagate(sid: string, fromFrame: number): Promise<{ job_id: string }> {
    return this.fetchFn(this.url(`/sessions/${sid}/propagate`), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ from_frame: fromFrame }),
    }).then(asJson);
  }

  progress(sid: string): Promise<Progress> {
    return this.fetchFn(this.url(`/sessions/${sid}/progress`)).then(asJson);
  }

  async result(sid: string, frame: number): Promise<ResultDoc | null> {
    const resp = await this.fetchFn(this.url(`/sessions/${sid}/results/${frame}`));
    if (resp.status === 404) return null;
    return asJson(resp);
  }

  edit(sid: string, frame: number, vertices: Point[]): Promise<unknown> {
    return this.fetchFn(this.url(`/sessions/${sid}/edit`), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ frame, curve: vertices }),
    }).then(asJson);
  }

  /**
   * Poll a running job, fetching fresh results incrementally. Errors are
   * surfaced to the caller; there is no silent retry loop.
   */
  async pollUntilDone(
    sid: string,
    fromFrame: number,
    onResult: (doc: ResultDoc) => void,
    intervalMs = 200,
    sleep: (ms: number) => Promise<void> = (ms) =>
      new Promise((res) => setTimeout(res, ms)),
  ): Promise<Progress> {
    let next = fromFrame + 1;
    for (;;) {
      const progress = await this.progress(sid);
      if (progress.error) {
        throw new ApiError(500, progress.error);
      }
      while (next <= progress.done_upto) {
        const doc = await this.result(sid, next);
        if (doc === null) break;
        onResult(doc);
        next += 1;
      }
      if (!progress.running) return progress;
      await sleep(intervalMs);
    }
  }
}
