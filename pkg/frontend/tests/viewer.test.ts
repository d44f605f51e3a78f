import assert from "node:assert/strict";
import { createHash } from "node:crypto";
import { test } from "node:test";

import {
  FractionalDprError,
  RasterDisplay,
  applyDrag,
  clampPan,
  layoutOneToOne,
  panNeeded,
} from "../src/viewer.js";

function sha256(data: Uint8Array): string {
  return createHash("sha256").update(data).digest("hex");
}

test("a 1024-wide render on a DPR-2 display is laid out at 512 CSS units", () => {
  const layout = layoutOneToOne(1024, 768, 2);
  assert.equal(layout.cssWidth, 512);
  assert.equal(layout.cssHeight, 384);
});

test("DPR 1 keeps raster and CSS sizes equal", () => {
  const layout = layoutOneToOne(640, 480, 1);
  assert.deepEqual(layout, { cssWidth: 640, cssHeight: 480 });
});

test("fractional device pixel ratios are a blocking error", () => {
  assert.throws(() => layoutOneToOne(100, 100, 1.25), FractionalDprError);
  assert.throws(() => layoutOneToOne(100, 100, 0.5), FractionalDprError);
});

test("pan offsets clamp to the raster bounds and pin when it fits", () => {
  // Content 800 in a 500 viewport: offsets live in [-300, 0].
  assert.equal(clampPan(-150, 800, 500), -150);
  assert.equal(clampPan(-900, 800, 500), -300);
  assert.equal(clampPan(50, 800, 500), 0);
  // Content smaller than the viewport never pans.
  assert.equal(clampPan(-50, 300, 500), 0);
});

test("dragging accumulates within bounds and never rescales", () => {
  const layout = { cssWidth: 800, cssHeight: 600 };
  let pan = { x: 0, y: 0 };
  pan = applyDrag(pan, -100, -50, layout, 500, 400);
  assert.deepEqual(pan, { x: -100, y: -50 });
  pan = applyDrag(pan, -1000, -1000, layout, 500, 400);
  assert.deepEqual(pan, { x: -300, y: -200 });
  assert.ok(panNeeded(layout, 500, 400));
  assert.ok(!panNeeded({ cssWidth: 100, cssHeight: 100 }, 500, 400));
});

test("displayed raster is byte-equal to the server render", () => {
  const serverBytes = new Uint8Array(4096);
  for (let i = 0; i < serverBytes.length; i++) {
    serverBytes[i] = (i * 31 + 7) % 256;
  }
  const display = new RasterDisplay();
  display.setRaster(serverBytes.buffer.slice(0));
  const shown = display.displayedBytes();
  assert.equal(sha256(shown), sha256(serverBytes));
});

test("display without a raster refuses to answer", () => {
  assert.throws(() => new RasterDisplay().displayedBytes());
});
