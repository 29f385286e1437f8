/**
 * Pointer-free zero-copy views over caller-owned 2D rasters.
 *
 * Data is row-major and contiguous; supported element kinds are f32
 * (scalar maps) and u8 (masks). Label maps coming back from the core are
 * u16 or u32 depending on the instance count.
 */

export type ElementKind = "f32" | "u8" | "u16" | "u32";

export interface ArrayView2D {
  rows: number;
  cols: number;
  kind: ElementKind;
  data: Float32Array | Uint8Array | Uint16Array | Uint32Array;
}

const KIND_CTOR: Record<ElementKind, { new (n: number): any }> = {
  f32: Float32Array,
  u8: Uint8Array,
  u16: Uint16Array,
  u32: Uint32Array,
};

export function view2d(
  data: ArrayView2D["data"],
  rows: number,
  cols: number,
): ArrayView2D {
  let kind: ElementKind;
  if (data instanceof Float32Array) kind = "f32";
  else if (data instanceof Uint8Array) kind = "u8";
  else if (data instanceof Uint16Array) kind = "u16";
  else if (data instanceof Uint32Array) kind = "u32";
  else throw new TypeError("unsupported typed array kind");
  const view = { rows, cols, kind, data };
  checkView(view);
  return view;
}

export function checkView(view: ArrayView2D): void {
  if (!Number.isInteger(view.rows) || !Number.isInteger(view.cols)
      || view.rows < 1 || view.cols < 1) {
    throw new RangeError(`invalid dimensions ${view.rows}x${view.cols}`);
  }
  if (view.data.length !== view.rows * view.cols) {
    throw new RangeError(
      `data length ${view.data.length} does not match ${view.rows}x${view.cols}`,
    );
  }
  if (!(view.data instanceof KIND_CTOR[view.kind])) {
    throw new TypeError(`data does not match declared kind ${view.kind}`);
  }
}

export function sameShape(...views: ArrayView2D[]): void {
  const [first, ...rest] = views;
  for (const v of rest) {
    if (v.rows !== first.rows || v.cols !== first.cols) {
      throw new RangeError(
        `shape mismatch: ${first.rows}x${first.cols} vs ${v.rows}x${v.cols}`,
      );
    }
  }
}
