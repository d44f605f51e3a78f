/**
 * Annotation session state machine.
 *
 * Owns the batch flow (training -> annotation passes -> done), the
 * double-submit guard, and the render request lifecycle where only the
 * latest request may win: moving the slider aborts the in-flight fetch and
 * stale responses are dropped.
 */

import { ApiClient, NextTask, OpinionAck } from "./api.js";
import { DEFAULT_STEPS } from "./slider.js";
import { RasterDisplay } from "./viewer.js";

export interface SessionEvents {
  onHint?: (hint: string) => void;
  onNotice?: (message: string) => void;
  onPhaseChange?: (task: NextTask) => void;
}

export type SubmitOutcome =
  | "submitted"
  | "blocked-in-flight"
  | "blocked-already-submitted"
  | "conflict-advanced";

export class AnnotationSession {
  readonly display = new RasterDisplay();
  /** Each image starts at the original resolution: top of the slider. */
  position: number;

  private task: NextTask | null = null;
  private queue: string[] = [];
  private currentImage: string | null = null;
  private submitInFlight = false;
  private submittedKeys = new Set<string>();
  private renderAbort: AbortController | null = null;
  private renderSequence = 0;

  constructor(
    private readonly api: ApiClient,
    private readonly steps: number = DEFAULT_STEPS,
    private readonly events: SessionEvents = {},
  ) {
    this.position = steps - 1;
  }

  get phase(): string {
    return this.task?.phase ?? "idle";
  }

  get currentImageId(): string | null {
    return this.currentImage;
  }

  get currentTask(): NextTask | null {
    return this.task;
  }

  async start(): Promise<NextTask> {
    const task = await this.api.nextTask();
    this.task = task;
    this.events.onPhaseChange?.(task);
    if (task.phase === "annotation") {
      this.queue = [...(task.remaining_image_ids ?? [])];
      this.advanceImage();
    } else {
      this.queue = [];
      this.currentImage = task.phase === "training" ? task.item?.image_id ?? null : null;
      this.position = this.steps - 1;
    }
    return task;
  }

  private advanceImage(): void {
    this.currentImage = this.queue.shift() ?? null;
    this.position = this.steps - 1; // every image starts at scale 1
  }

  /**
   * Fetch the render for the current image at a slider position. Only the
   * newest request may populate the display; older in-flight requests are
   * aborted and their responses discarded.
   */
  async requestRender(position: number): Promise<ArrayBuffer | null> {
    if (this.currentImage === null) {
      return null;
    }
    this.position = position;
    this.renderAbort?.abort();
    const controller = new AbortController();
    this.renderAbort = controller;
    const sequence = ++this.renderSequence;
    let bytes: ArrayBuffer;
    try {
      bytes = await this.api.fetchRender(this.currentImage, position, controller.signal);
    } catch (error) {
      if (controller.signal.aborted) {
        return null; // superseded by a newer request
      }
      throw error;
    }
    if (sequence !== this.renderSequence) {
      return null; // a newer request already won
    }
    this.display.setRaster(bytes);
    return bytes;
  }

  /** Submit the current image at the current slider position. */
  async submitCurrent(durationMs?: number): Promise<SubmitOutcome> {
    const task = this.task;
    if (task === null || task.phase !== "annotation" || this.currentImage === null) {
      throw new Error("no annotatable image is active");
    }
    if (this.submitInFlight) {
      return "blocked-in-flight";
    }
    const key = `${task.batch_id}:${task.repetition}:${this.currentImage}`;
    if (this.submittedKeys.has(key)) {
      return "blocked-already-submitted";
    }
    this.submitInFlight = true;
    try {
      const result = await this.api.submitOpinion({
        batch_id: task.batch_id as string,
        repetition: task.repetition as number,
        image_id: this.currentImage,
        slider_position: this.position,
        duration_ms: durationMs,
        request_token: key,
      });
      if (result.kind === "ok") {
        this.submittedKeys.add(key);
        this.assertEcho(result.ack, key);
        this.advanceImage();
        return "submitted";
      }
      if (result.kind === "duplicate") {
        // Someone already recorded it (e.g. an earlier retry landed):
        // non-blocking notice, then move on.
        this.submittedKeys.add(key);
        this.events.onNotice?.(result.detail);
        this.advanceImage();
        return "conflict-advanced";
      }
      throw new Error(`submission failed (${result.status}): ${result.detail}`);
    } finally {
      this.submitInFlight = false;
    }
  }

  private assertEcho(ack: OpinionAck, key: string): void {
    if (ack.image_id !== key.split(":")[2] || ack.slider_position !== this.position) {
      throw new Error(
        `server echo mismatch: sent ${key}@${this.position}, ` +
          `got ${ack.image_id}@${ack.slider_position}`,
      );
    }
  }

  /** Training submissions keep the slider where it is on rejection so the
   * participant can adjust from their previous answer. */
  async submitTraining(): Promise<boolean> {
    const task = this.task;
    if (task === null || task.phase !== "training" || this.currentImage === null) {
      throw new Error("no training item is active");
    }
    const ack = await this.api.submitTraining({
      image_id: this.currentImage,
      slider_position: this.position,
    });
    if (!ack.accepted) {
      if (ack.hint) {
        this.events.onHint?.(ack.hint);
      }
      return false;
    }
    await this.start(); // next training item or the first batch
    return true;
  }

  get batchFinished(): boolean {
    return this.task?.phase === "annotation" && this.currentImage === null;
  }
}
