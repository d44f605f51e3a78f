/**
 * 1:1 pixel display math and pan state.
 *
 * The client never resamples pixels: the raster shown on screen is byte-wise
 * the server render. Each image pixel is displayed at the size of one native
 * screen pixel by dividing the raster size by the device pixel ratio when
 * laying it out in CSS units.
 */

export class FractionalDprError extends Error {
  constructor(public readonly dpr: number) {
    super(
      `device pixel ratio ${dpr} cannot map image pixels 1:1 to screen ` +
        `pixels; annotation data quality would be compromised`,
    );
  }
}

export interface CssLayout {
  cssWidth: number;
  cssHeight: number;
}

export function isExactPixelRatio(dpr: number): boolean {
  return Number.isInteger(dpr) && dpr >= 1;
}

/** CSS layout size so that one image pixel covers one physical pixel. */
export function layoutOneToOne(
  renderWidth: number,
  renderHeight: number,
  dpr: number,
): CssLayout {
  if (!isExactPixelRatio(dpr)) {
    throw new FractionalDprError(dpr);
  }
  return { cssWidth: renderWidth / dpr, cssHeight: renderHeight / dpr };
}

export function panNeeded(layout: CssLayout, viewportWidth: number, viewportHeight: number): boolean {
  return layout.cssWidth > viewportWidth || layout.cssHeight > viewportHeight;
}

/** Clamp a pan offset along one axis so the raster never detaches from the
 * viewport edge; when the raster fits, the offset is pinned to 0. */
export function clampPan(offset: number, contentSize: number, viewportSize: number): number {
  if (contentSize <= viewportSize) {
    return 0;
  }
  const min = viewportSize - contentSize;
  return Math.min(0, Math.max(min, offset));
}

export interface PanState {
  x: number;
  y: number;
}

export function applyDrag(
  state: PanState,
  dx: number,
  dy: number,
  layout: CssLayout,
  viewportWidth: number,
  viewportHeight: number,
): PanState {
  return {
    x: clampPan(state.x + dx, layout.cssWidth, viewportWidth),
    y: clampPan(state.y + dy, layout.cssHeight, viewportHeight),
  };
}

/**
 * Holds the raster exactly as received. Rendering goes through a blob URL of
 * these bytes; no canvas, no re-encode, no client-side scaling.
 */
export class RasterDisplay {
  private bytes: Uint8Array | null = null;

  setRaster(data: ArrayBuffer | Uint8Array): void {
    this.bytes = data instanceof Uint8Array ? data : new Uint8Array(data);
  }

  get rasterBytes(): Uint8Array | null {
    return this.bytes;
  }

  /** The exact bytes handed to the <img> element via a blob. */
  displayedBytes(): Uint8Array {
    if (this.bytes === null) {
      throw new Error("no raster loaded");
    }
    return this.bytes;
  }
}
