/**
 * DOM wiring for the annotation client. All logic lives in the session,
 * slider and viewer modules; this file only connects them to elements.
 */

import { ApiClient } from "./api.js";
import { nudgePosition } from "./slider.js";
import {
  FractionalDprError,
  applyDrag,
  layoutOneToOne,
  panNeeded,
  PanState,
} from "./viewer.js";
import { AnnotationSession } from "./session.js";

const RENDER_DEBOUNCE_MS = 100;

function element<T extends HTMLElement>(id: string): T {
  const found = document.getElementById(id);
  if (!found) {
    throw new Error(`missing element #${id}`);
  }
  return found as T;
}

function showBanner(message: string, blocking: boolean): void {
  const banner = element<HTMLDivElement>("banner");
  banner.textContent = message;
  banner.className = blocking ? "banner blocking" : "banner notice";
  banner.hidden = false;
  if (!blocking) {
    setTimeout(() => {
      banner.hidden = true;
    }, 4000);
  }
}

async function boot(): Promise<void> {
  const params = new URLSearchParams(window.location.search);
  const token = params.get("token") ?? "";
  if (!token) {
    showBanner("missing participant token (?token=...)", true);
    return;
  }
  const api = new ApiClient("", token);
  const grid = await api.sliderGrid();

  const dpr = window.devicePixelRatio || 1;
  try {
    layoutOneToOne(1, 1, dpr);
  } catch (error) {
    if (error instanceof FractionalDprError) {
      showBanner(error.message, true);
      return; // blocking: data quality risk
    }
    throw error;
  }

  const session = new AnnotationSession(api, grid.slider_steps, {
    onHint: (hint) => showBanner(`hint: ${hint}`, false),
    onNotice: (message) => showBanner(message, false),
  });

  const slider = element<HTMLInputElement>("scale-slider");
  const image = element<HTMLImageElement>("stimulus");
  const viewport = element<HTMLDivElement>("viewport");
  const status = element<HTMLDivElement>("status");
  const submit = element<HTMLButtonElement>("submit");

  slider.min = "0";
  slider.max = String(grid.slider_steps - 1);

  let pan: PanState = { x: 0, y: 0 };
  let blobUrl: string | null = null;
  let debounceTimer: number | undefined;

  async function showRender(position: number): Promise<void> {
    const bytes = await session.requestRender(position);
    if (bytes === null) {
      return; // superseded
    }
    // The blob holds the server bytes untouched; the <img> is laid out at
    // 1:1 device pixels and never rescaled client-side.
    if (blobUrl) {
      URL.revokeObjectURL(blobUrl);
    }
    blobUrl = URL.createObjectURL(new Blob([bytes], { type: "image/png" }));
    image.onload = () => {
      const layout = layoutOneToOne(image.naturalWidth, image.naturalHeight, dpr);
      image.style.width = `${layout.cssWidth}px`;
      image.style.height = `${layout.cssHeight}px`;
      pan = { x: 0, y: 0 };
      image.style.transform = "translate(0px, 0px)";
      if (panNeeded(layout, viewport.clientWidth, viewport.clientHeight)) {
        showBanner("image larger than the window: drag to pan", false);
      }
    };
    image.src = blobUrl;
  }

  function refreshStatus(): void {
    const task = session.currentTask;
    if (!task) {
      return;
    }
    if (task.phase === "training") {
      status.textContent = `training: ${task.remaining_items} item(s) left`;
    } else if (task.phase === "annotation") {
      status.textContent =
        `batch ${task.batch_id}, pass ${task.repetition}: ` +
        `${session.currentImageId ?? "done"}`;
    } else if (task.phase === "locked") {
      const unlock = new Date((task.unlock_at ?? 0) * 1000);
      status.textContent = `second pass unlocks at ${unlock.toLocaleString()}`;
    } else {
      status.textContent = "all batches complete - thank you";
    }
  }

  async function advance(): Promise<void> {
    if (session.phase !== "annotation" || session.batchFinished) {
      await session.start();
    }
    refreshStatus();
    if (session.currentImageId !== null) {
      slider.value = String(session.position);
      await showRender(session.position);
    }
  }

  slider.addEventListener("input", () => {
    const position = Number(slider.value);
    window.clearTimeout(debounceTimer);
    debounceTimer = window.setTimeout(() => {
      void showRender(position);
    }, RENDER_DEBOUNCE_MS);
  });
  slider.addEventListener("change", () => {
    // Authoritative render on release, bypassing the debounce.
    window.clearTimeout(debounceTimer);
    void showRender(Number(slider.value));
  });

  window.addEventListener("keydown", (event) => {
    if (event.key === "ArrowLeft" || event.key === "ArrowRight") {
      const delta = event.key === "ArrowLeft" ? -1 : 1;
      const next = nudgePosition(Number(slider.value), delta, grid.slider_steps);
      slider.value = String(next);
      void showRender(next);
      event.preventDefault();
    }
  });

  let dragging = false;
  let last: [number, number] = [0, 0];
  viewport.addEventListener("pointerdown", (event) => {
    dragging = true;
    last = [event.clientX, event.clientY];
  });
  window.addEventListener("pointerup", () => {
    dragging = false;
  });
  window.addEventListener("pointermove", (event) => {
    if (!dragging) {
      return;
    }
    const layout = layoutOneToOne(image.naturalWidth, image.naturalHeight, dpr);
    pan = applyDrag(
      pan,
      event.clientX - last[0],
      event.clientY - last[1],
      layout,
      viewport.clientWidth,
      viewport.clientHeight,
    );
    last = [event.clientX, event.clientY];
    image.style.transform = `translate(${pan.x}px, ${pan.y}px)`;
  });

  submit.addEventListener("click", async () => {
    if (session.phase === "training") {
      await session.submitTraining();
      await advance();
      return;
    }
    const outcome = await session.submitCurrent();
    if (outcome === "submitted" || outcome === "conflict-advanced") {
      await advance();
    }
  });

  await advance();
}

void boot().catch((error) => showBanner(String(error), true));
