/**
 * Thin-client equivalence, end to end against the real service: editing the
 * curve at frame k and re-propagating must produce curve documents that are
 * byte-identical to a fresh CLI run re-initialized at frame k with the same
 * curve and seed.
 */
import { spawn, spawnSync } from "node:child_process";
import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { TrackerClient } from "../src/api.js";
import { CurveDocument } from "../src/schema.js";

const SEED = 9;
const HERE = dirname(fileURLToPath(import.meta.url));
const PKG_ROOT = join(HERE, "..", "..");
const PY = process.env.PYTHON ?? "python3";

let work: string;
let server: ReturnType<typeof spawn> | null = null;
let client: TrackerClient;
let port: number;

function py(args: string[], timeoutMs = 600_000) {
  const out = spawnSync(PY, args, {
    cwd: PKG_ROOT,
    timeout: timeoutMs,
    encoding: "utf-8",
  });
  if (out.status !== 0) {
    throw new Error(`python ${args.join(" ")} failed:\n${out.stderr}`);
  }
  return out.stdout;
}

async function waitForServer(url: string, timeoutMs = 30_000): Promise<void> {
  const t0 = Date.now();
  for (;;) {
    try {
      const resp = await fetch(url + "/meta");
      if (resp.ok) return;
    } catch {
      /* not up yet */
    }
    if (Date.now() - t0 > timeoutMs) throw new Error("service did not start");
    await new Promise((res) => setTimeout(res, 250));
  }
}

beforeAll(async () => {
  work = mkdtempSync(join(tmpdir(), "rototrack-ui-"));
  py(["scripts/make_demo_sequence.py", work, "--kind", "drift", "--seed",
    "55", "--frames", "5", "--width", "160", "--height", "120"]);
  port = 20000 + Math.floor(Math.random() * 20000);
  server = spawn(PY, ["-m", "rototrack.cli", "serve", join(work, "frames"),
    "--port", String(port), "--seed", String(SEED)], { cwd: PKG_ROOT });
  client = new TrackerClient(`http://127.0.0.1:${port}`);
  await waitForServer(`http://127.0.0.1:${port}`);
}, 120_000);

afterAll(() => {
  server?.kill();
});

describe("thin-client equivalence", () => {
  it("edit at frame k + re-propagate == fresh CLI run from frame k",
    async () => {
      const initDoc = JSON.parse(
        readFileSync(join(work, "init.json"), "utf-8")) as CurveDocument;
      const created = await client.createSession(initDoc,
        { preset: "medium" });
      const sid = created.session_id;
      await client.propagate(sid, 0);
      await client.pollUntilDone(sid, 0, () => {}, 150);
      const at2 = await client.result(sid, 2);
      expect(at2).not.toBeNull();
      const edited = at2!.curve.vertices.map(
        ([x, y]) => [x + 2, y + 1] as [number, number]);
      await client.edit(sid, 2, edited);
      expect(await client.result(sid, 3)).toBeNull(); // stale results dropped
      await client.propagate(sid, 2);
      await client.pollUntilDone(sid, 2, () => {}, 150);

      // CLI run re-initialized at frame 2 with the same curve and seed
      const curveFile = join(work, "edited2.json");
      writeFileSync(curveFile, JSON.stringify(
        { frame_index: 2, vertices: edited }) + "\n");
      const outDir = join(work, "cli-run");
      py(["-m", "rototrack.cli", "track", join(work, "frames"), curveFile,
        "--out", outDir, "--preset", "medium", "--seed", String(SEED),
        "--quiet"]);

      for (const k of [3, 4]) {
        const doc = await client.result(sid, k);
        expect(doc).not.toBeNull();
        const cliBytes = readFileSync(
          join(outDir, "curves", `0000${k}.json`), "utf-8");
        expect(doc!.document).toBe(cliBytes);
      }
      // frames <= k untouched by the re-propagation
      const at1 = await client.result(sid, 1);
      expect(at1!.frame_index).toBe(1);
    }, 600_000);
});
