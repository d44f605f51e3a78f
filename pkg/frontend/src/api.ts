/** Typed client for the annotation service (/api/v1 only). */

export interface SliderGridPayload {
  slider_steps: number;
  scale_lower_bound: number;
  scales: number[];
}

export interface TrainingTask {
  image_id: string;
  hint: string;
}

export interface NextTask {
  phase: "training" | "annotation" | "locked" | "done";
  item?: TrainingTask | null;
  remaining_items?: number | null;
  batch_id?: string | null;
  repetition?: number | null;
  generation?: number | null;
  image_ids?: string[] | null;
  remaining_image_ids?: string[] | null;
  annotated_count?: number | null;
  unlock_at?: number | null;
}

export interface OpinionAck {
  participant_id: string;
  image_id: string;
  slider_position: number;
  scale_value: number;
  batch_id: string;
  repetition: number;
  generation: number;
  remaining: number;
  batch_complete: boolean;
}

export interface TrainingAck {
  accepted: boolean;
  hint: string | null;
  status: string;
}

export type SubmitResult =
  | { kind: "ok"; ack: OpinionAck }
  | { kind: "duplicate"; detail: string }
  | { kind: "error"; status: number; detail: string };

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly token: string,
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private headers(): Record<string, string> {
    return {
      Authorization: `Bearer ${this.token}`,
      "Content-Type": "application/json",
    };
  }

  async sliderGrid(): Promise<SliderGridPayload> {
    const response = await this.fetchFn(`${this.baseUrl}/api/v1/slider-grid`);
    if (!response.ok) {
      throw new Error(`slider grid unavailable: ${response.status}`);
    }
    return (await response.json()) as SliderGridPayload;
  }

  async nextTask(): Promise<NextTask> {
    const response = await this.fetchFn(`${this.baseUrl}/api/v1/batch/next`, {
      headers: this.headers(),
    });
    if (!response.ok) {
      throw new Error(`next task failed: ${response.status}`);
    }
    return (await response.json()) as NextTask;
  }

  /** Renders are requested by slider position so the server cache stays on
   * the slider grid and the bytes are grid-exact. */
  renderUrl(imageId: string, position: number, kernel = "lanczos"): string {
    return (
      `${this.baseUrl}/api/v1/image/${encodeURIComponent(imageId)}/render` +
      `?position=${position}&kernel=${kernel}`
    );
  }

  async fetchRender(
    imageId: string,
    position: number,
    signal?: AbortSignal,
  ): Promise<ArrayBuffer> {
    const response = await this.fetchFn(this.renderUrl(imageId, position), {
      headers: { Authorization: `Bearer ${this.token}` },
      signal,
    });
    if (!response.ok) {
      throw new Error(`render failed: ${response.status}`);
    }
    return await response.arrayBuffer();
  }

  async submitOpinion(body: {
    batch_id: string;
    repetition: number;
    image_id: string;
    slider_position: number;
    duration_ms?: number;
    request_token?: string;
  }): Promise<SubmitResult> {
    const response = await this.fetchFn(`${this.baseUrl}/api/v1/opinion`, {
      method: "POST",
      headers: this.headers(),
      body: JSON.stringify(body),
    });
    if (response.ok) {
      return { kind: "ok", ack: (await response.json()) as OpinionAck };
    }
    const detail = await extractDetail(response);
    if (response.status === 409 && detail.includes("duplicate")) {
      return { kind: "duplicate", detail };
    }
    return { kind: "error", status: response.status, detail };
  }

  async submitTraining(body: {
    image_id: string;
    slider_position: number;
  }): Promise<TrainingAck> {
    const response = await this.fetchFn(`${this.baseUrl}/api/v1/training/opinion`, {
      method: "POST",
      headers: this.headers(),
      body: JSON.stringify(body),
    });
    if (!response.ok) {
      throw new Error(`training submission failed: ${response.status}`);
    }
    return (await response.json()) as TrainingAck;
  }
}

async function extractDetail(response: Response): Promise<string> {
  try {
    const payload = (await response.json()) as { detail?: string };
    return payload.detail ?? `${response.status}`;
  } catch {
    return `${response.status}`;
  }
}
