import { describe, expect, it, vi } from "vitest";

import { ApiError, TrackerClient } from "../src/api.js";

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

describe("tracker client", () => {
  it("requests meta from the right url", async () => {
    const fetchFn = vi.fn(async () =>
      jsonResponse({ frame_count: 5, width: 160, height: 120 }));
    const client = new TrackerClient("http://x:1/", fetchFn as typeof fetch);
    const meta = await client.meta();
    expect(meta.frame_count).toBe(5);
    expect(fetchFn).toHaveBeenCalledWith("http://x:1/meta");
  });

  it("propagates server errors without retrying", async () => {
    const fetchFn = vi.fn(async () => jsonResponse({ error: "nope" }, 400));
    const client = new TrackerClient("http://x:1", fetchFn as typeof fetch);
    await expect(client.createSession({ frame_index: 0, vertices: [] }))
      .rejects.toThrowError(ApiError);
    expect(fetchFn).toHaveBeenCalledTimes(1);
  });

  it("returns null for results that are not ready", async () => {
    const fetchFn = vi.fn(async () => jsonResponse({ error: "not ready" }, 404));
    const client = new TrackerClient("http://x:1", fetchFn as typeof fetch);
    expect(await client.result("s", 3)).toBeNull();
  });

  it("pollUntilDone fetches results incrementally and stops", async () => {
    const progress = [
      { running: true, done_upto: 1, total: 3, job_id: "j", error: null },
      { running: false, done_upto: 3, total: 3, job_id: "j", error: null },
    ];
    let call = 0;
    const fetchFn = vi.fn(async (url: RequestInfo | URL) => {
      const path = String(url);
      if (path.endsWith("/progress")) {
        return jsonResponse(progress[Math.min(call++, 1)]);
      }
      const m = path.match(/\/results\/(\d+)$/);
      if (m) {
        return jsonResponse({
          frame_index: Number(m[1]),
          curve: { frame_index: Number(m[1]), vertices: [[0, 0], [1, 0], [0, 1]] },
          document: "",
          energy: null,
          iou: null,
        });
      }
      throw new Error(`unexpected ${path}`);
    });
    const client = new TrackerClient("http://x:1", fetchFn as typeof fetch);
    const seen: number[] = [];
    const done = await client.pollUntilDone("s", 0,
      (doc) => seen.push(doc.frame_index), 1, async () => {});
    expect(seen).toEqual([1, 2, 3]);
    expect(done.running).toBe(false);
  });

  it("pollUntilDone surfaces job errors", async () => {
    const fetchFn = vi.fn(async () => jsonResponse(
      { running: false, done_upto: 0, total: 3, job_id: "j", error: "boom" }));
    const client = new TrackerClient("http://x:1", fetchFn as typeof fetch);
    await expect(client.pollUntilDone("s", 0, () => {}, 1, async () => {}))
      .rejects.toThrowError("boom");
  });
});
