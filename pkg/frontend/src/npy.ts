/**
 * Minimal NPY v1.0 encoder/decoder for 2D arrays.
 *
 * Matches the subset the core CLI reads and writes: little-endian
 * float32 (<f4), uint8 (|u1), uint16 (<u2), uint32 (<u4); C order;
 * exactly two dimensions; headers padded so the payload starts on a
 * 64-byte boundary.
 */

import { ArrayView2D, ElementKind, view2d } from "./arrays.js";

const MAGIC = Buffer.from("\x93NUMPY", "latin1");

const DESCR_BY_KIND: Record<ElementKind, string> = {
  f32: "<f4",
  u8: "|u1",
  u16: "<u2",
  u32: "<u4",
};

const KIND_BY_DESCR: Record<string, ElementKind> = {
  "<f4": "f32",
  "|u1": "u8",
  "<u2": "u16",
  "<u4": "u32",
};

export class NpyFormatError extends Error {
  readonly offset: number;

  constructor(message: string, offset: number) {
    super(`${message} (byte offset ${offset})`);
    this.name = "NpyFormatError";
    this.offset = offset;
  }
}

export function encodeNpy(view: ArrayView2D): Buffer {
  const descr = DESCR_BY_KIND[view.kind];
  const header =
    `{'descr': '${descr}', 'fortran_order': False, ` +
    `'shape': (${view.rows}, ${view.cols}), }`;
  // magic(6) + version(2) + headerLen(2) + header, padded to 64 bytes,
  // newline-terminated.
  const prefix = MAGIC.length + 2 + 2;
  const unpadded = prefix + header.length + 1;
  const padded = Math.ceil(unpadded / 64) * 64;
  const headerText = header + " ".repeat(padded - unpadded) + "\n";

  const head = Buffer.alloc(padded);
  MAGIC.copy(head, 0);
  head[6] = 1;
  head[7] = 0;
  head.writeUInt16LE(headerText.length, 8);
  head.write(headerText, 10, "latin1");

  const payload = Buffer.from(
    view.data.buffer,
    view.data.byteOffset,
    view.data.byteLength,
  );
  return Buffer.concat([head, Buffer.from(payload)]);
}

export function decodeNpy(buf: Buffer): ArrayView2D {
  if (buf.length < 10 || !buf.subarray(0, 6).equals(MAGIC)) {
    throw new NpyFormatError("bad magic string", 0);
  }
  if (buf[6] !== 1 || buf[7] !== 0) {
    throw new NpyFormatError(`unsupported version ${buf[6]}.${buf[7]}`, 6);
  }
  const headerLen = buf.readUInt16LE(8);
  const headerEnd = 10 + headerLen;
  if (buf.length < headerEnd) {
    throw new NpyFormatError("truncated header", 8);
  }
  const header = buf.subarray(10, headerEnd).toString("latin1");

  const descrMatch = header.match(/'descr'\s*:\s*'([^']+)'/);
  const fortranMatch = header.match(/'fortran_order'\s*:\s*(True|False)/);
  const shapeMatch = header.match(/'shape'\s*:\s*\(([^)]*)\)/);
  if (!descrMatch || !fortranMatch || !shapeMatch) {
    throw new NpyFormatError("malformed header dictionary", 10);
  }
  const kind = KIND_BY_DESCR[descrMatch[1]];
  if (kind === undefined) {
    throw new NpyFormatError(`unsupported dtype ${descrMatch[1]}`, 10);
  }
  if (fortranMatch[1] === "True") {
    throw new NpyFormatError("fortran order not supported", 10);
  }
  const dims = shapeMatch[1]
    .split(",")
    .map((s) => s.trim())
    .filter((s) => s.length > 0)
    .map((s) => Number.parseInt(s, 10));
  if (dims.length !== 2 || dims.some((d) => !Number.isInteger(d) || d < 0)) {
    throw new NpyFormatError(`expected a 2D shape, got (${shapeMatch[1]})`, 10);
  }
  const [rows, cols] = dims;

  const itemSize = { f32: 4, u8: 1, u16: 2, u32: 4 }[kind];
  const expected = rows * cols * itemSize;
  const payload = buf.subarray(headerEnd);
  if (payload.length !== expected) {
    throw new NpyFormatError(
      `payload is ${payload.length} bytes, expected ${expected}`,
      headerEnd,
    );
  }
  // Copy so the view owns aligned memory independent of the file buffer.
  const bytes = new Uint8Array(expected);
  bytes.set(payload);
  const data =
    kind === "f32" ? new Float32Array(bytes.buffer)
    : kind === "u16" ? new Uint16Array(bytes.buffer)
    : kind === "u32" ? new Uint32Array(bytes.buffer)
    : bytes;
  return view2d(data, rows, cols);
}
