import assert from "node:assert/strict";
import { createHash } from "node:crypto";
import { test } from "node:test";

import { ApiClient, FetchLike } from "../src/api.js";
import { AnnotationSession } from "../src/session.js";

/** Scriptable fake service covering the endpoints the session touches. */
class FakeService {
  submissions: Array<{ image_id: string; slider_position: number }> = [];
  renderDelays = new Map<string, () => void>();
  pendingRenders: Array<{ key: string; resolve: (b: ArrayBuffer) => void }> = [];
  duplicateOnce = false;
  trainingAccepts = false;
  task: unknown = {
    phase: "annotation",
    batch_id: "b001",
    repetition: 1,
    generation: 1,
    image_ids: ["imgA", "imgB"],
    remaining_image_ids: ["imgA", "imgB"],
    annotated_count: 0,
  };

  renderBytesFor(imageId: string, position: number): Uint8Array {
    const seedString = `${imageId}@${position}`;
    const digest = createHash("sha256").update(seedString).digest();
    return new Uint8Array(digest);
  }

  fetch: FetchLike = (input, init) => {
    const url = String(input);
    if (url.includes("/batch/next")) {
      return Promise.resolve(json(this.task));
    }
    if (url.includes("/render")) {
      const match = /image\/([^/]+)\/render\?position=(\d+)/.exec(url);
      if (!match) throw new Error(`bad render url ${url}`);
      const [, imageId, position] = match;
      const bytes = this.renderBytesFor(imageId, Number(position));
      const signal = init?.signal ?? null;
      return new Promise<Response>((resolve, reject) => {
        const finish = () =>
          resolve(new Response(bytes.slice(0), { status: 200 }));
        if (signal) {
          signal.addEventListener("abort", () =>
            reject(new DOMException("aborted", "AbortError")),
          );
        }
        const key = `${imageId}@${position}`;
        if (this.renderDelays.has(key)) {
          this.pendingRenders.push({ key, resolve: () => finish() });
        } else {
          finish();
        }
      });
    }
    if (url.includes("/training/opinion")) {
      if (this.trainingAccepts) {
        return Promise.resolve(
          json({ accepted: true, hint: null, status: "qualified" }),
        );
      }
      return Promise.resolve(
        json({ accepted: false, hint: "look at the fine detail", status: "in_training" }),
      );
    }
    if (url.includes("/opinion")) {
      const body = JSON.parse(String(init?.body));
      if (this.duplicateOnce) {
        this.duplicateOnce = false;
        return Promise.resolve(
          json({ detail: "duplicate: already annotated" }, 409),
        );
      }
      this.submissions.push(body);
      return Promise.resolve(
        json({
          participant_id: "p1",
          image_id: body.image_id,
          slider_position: body.slider_position,
          scale_value: 0.5,
          batch_id: body.batch_id,
          repetition: body.repetition,
          generation: 1,
          remaining: 1,
          batch_complete: false,
        }),
      );
    }
    throw new Error(`unexpected url ${url}`);
  };
}

function json(payload: unknown, status = 200): Response {
  return new Response(JSON.stringify(payload), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

function makeSession(service: FakeService, events = {}) {
  const api = new ApiClient("", "token-1", service.fetch);
  return new AnnotationSession(api, 100, events);
}

test("every image starts at the top of the slider (original scale)", async () => {
  const service = new FakeService();
  const session = makeSession(service);
  await session.start();
  assert.equal(session.position, 99);
  assert.equal(session.currentImageId, "imgA");
});

test("double submit is prevented while a request is in flight", async () => {
  const service = new FakeService();
  const session = makeSession(service);
  await session.start();
  const [first, second] = await Promise.all([
    session.submitCurrent(),
    session.submitCurrent(),
  ]);
  const outcomes = [first, second].sort();
  assert.deepEqual(outcomes, ["blocked-in-flight", "submitted"]);
  assert.equal(service.submissions.length, 1);
});

test("an image cannot be submitted twice in the same repetition", async () => {
  const service = new FakeService();
  const session = makeSession(service);
  await session.start();
  assert.equal(await session.submitCurrent(), "submitted");
  // Force the session back onto the already-submitted image.
  (session as unknown as { currentImage: string | null }).currentImage = "imgA";
  assert.equal(await session.submitCurrent(), "blocked-already-submitted");
  assert.equal(service.submissions.length, 1);
});

test("a 409 duplicate surfaces as a notice and auto-advances", async () => {
  const service = new FakeService();
  service.duplicateOnce = true;
  const notices: string[] = [];
  const session = makeSession(service, {
    onNotice: (message: string) => notices.push(message),
  });
  await session.start();
  const outcome = await session.submitCurrent();
  assert.equal(outcome, "conflict-advanced");
  assert.equal(notices.length, 1);
  assert.match(notices[0], /duplicate/);
  assert.equal(session.currentImageId, "imgB");
});

test("moving the slider cancels the in-flight render; the latest wins", async () => {
  const service = new FakeService();
  service.renderDelays.set("imgA@80", () => undefined); // hold the first request
  const session = makeSession(service);
  await session.start();

  const stale = session.requestRender(80); // stays pending
  const fresh = await session.requestRender(40); // supersedes it
  assert.notEqual(fresh, null);
  const expected = service.renderBytesFor("imgA", 40);
  assert.deepEqual(new Uint8Array(fresh as ArrayBuffer), expected);

  assert.equal(await stale, null); // aborted, not an error
  // The display holds the latest render's bytes.
  const digest = (b: Uint8Array) => createHash("sha256").update(b).digest("hex");
  assert.equal(digest(session.display.displayedBytes()), digest(expected));
});

test("stale render responses never overwrite newer ones", async () => {
  const service = new FakeService();
  service.renderDelays.set("imgA@70", () => undefined);
  const session = makeSession(service);
  await session.start();
  const stale = session.requestRender(70);
  await session.requestRender(30);
  // Let the stale response land after the fresh one.
  for (const pending of service.pendingRenders) {
    pending.resolve(new ArrayBuffer(0));
  }
  assert.equal(await stale, null);
  const expected = service.renderBytesFor("imgA", 30);
  assert.deepEqual(session.display.displayedBytes(), expected);
});

test("training rejection shows the hint and keeps the slider position", async () => {
  const service = new FakeService();
  service.task = {
    phase: "training",
    item: { image_id: "imgT", hint: "look at the fine detail" },
    remaining_items: 1,
  };
  const hints: string[] = [];
  const session = makeSession(service, { onHint: (h: string) => hints.push(h) });
  await session.start();
  assert.equal(session.phase, "training");
  session.position = 42;
  const accepted = await session.submitTraining();
  assert.equal(accepted, false);
  assert.deepEqual(hints, ["look at the fine detail"]);
  assert.equal(session.position, 42); // retained for adjustment
});

test("accepted training advances to the next task", async () => {
  const service = new FakeService();
  service.task = {
    phase: "training",
    item: { image_id: "imgT", hint: "" },
    remaining_items: 1,
  };
  service.trainingAccepts = true;
  const session = makeSession(service);
  await session.start();
  service.task = {
    phase: "annotation",
    batch_id: "b001",
    repetition: 1,
    generation: 1,
    image_ids: ["imgA"],
    remaining_image_ids: ["imgA"],
    annotated_count: 0,
  };
  const accepted = await session.submitTraining();
  assert.equal(accepted, true);
  assert.equal(session.phase, "annotation");
  assert.equal(session.currentImageId, "imgA");
});

test("locked phase exposes the unlock time", async () => {
  const service = new FakeService();
  service.task = { phase: "locked", unlock_at: 1_800_000_000 };
  const session = makeSession(service);
  const task = await session.start();
  assert.equal(task.phase, "locked");
  assert.equal(task.unlock_at, 1_800_000_000);
  assert.equal(session.currentImageId, null);
});
