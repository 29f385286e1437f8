import { describe, expect, it } from "vitest";

import { decodeNpy, encodeNpy, NpyFormatError } from "../src/npy.js";
import { view2d } from "../src/arrays.js";

describe("encodeNpy / decodeNpy", () => {
  it("round-trips a float32 map", () => {
    const data = new Float32Array([0.25, 1.5, -3, 0, 7, 0.125]);
    const out = decodeNpy(encodeNpy(view2d(data, 2, 3)));
    expect(out.rows).toBe(2);
    expect(out.cols).toBe(3);
    expect(out.kind).toBe("f32");
    expect(Array.from(out.data)).toEqual(Array.from(data));
  });

  it("round-trips all unsigned integer kinds", () => {
    for (const data of [
      new Uint8Array([0, 1, 255, 3]),
      new Uint16Array([0, 1, 65535, 3]),
      new Uint32Array([0, 1, 4294967295, 3]),
    ]) {
      const out = decodeNpy(encodeNpy(view2d(data, 2, 2)));
      expect(Array.from(out.data)).toEqual(Array.from(data));
    }
  });

  it("starts the payload on a 64-byte boundary", () => {
    const buf = encodeNpy(view2d(new Uint8Array(6), 2, 3));
    const headerLen = buf.readUInt16LE(8);
    expect((10 + headerLen) % 64).toBe(0);
  });

  it("decoding never aliases the input buffer", () => {
    const buf = encodeNpy(view2d(new Float32Array([1, 2, 3, 4]), 2, 2));
    const out = decodeNpy(buf);
    buf.fill(0);
    expect(Array.from(out.data)).toEqual([1, 2, 3, 4]);
  });

  it("rejects a bad magic string with its offset", () => {
    const buf = encodeNpy(view2d(new Uint8Array(1), 1, 1));
    buf[0] = 0x00;
    expect(() => decodeNpy(buf)).toThrowError(NpyFormatError);
    try {
      decodeNpy(buf);
    } catch (err) {
      expect((err as NpyFormatError).offset).toBe(0);
    }
  });

  it("rejects unsupported versions, dtypes, order, and truncation", () => {
    const good = encodeNpy(view2d(new Float32Array(4), 2, 2));

    const badVersion = Buffer.from(good);
    badVersion[6] = 2;
    expect(() => decodeNpy(badVersion)).toThrowError(/version/);

    const bigEndian = Buffer.from(
      good.toString("latin1").replace("<f4", ">f4"),
      "latin1",
    );
    expect(() => decodeNpy(bigEndian)).toThrowError(/dtype/);

    const fortran = Buffer.from(
      good.toString("latin1").replace("False", "True "),
      "latin1",
    );
    expect(() => decodeNpy(fortran)).toThrowError(/fortran/);

    expect(() => decodeNpy(good.subarray(0, good.length - 2)))
      .toThrowError(/payload/);
  });

  it("rejects non-2D shapes", () => {
    const good = encodeNpy(view2d(new Float32Array(4), 2, 2));
    const flat = Buffer.from(
      good.toString("latin1").replace("(2, 2)", "(4,)  "),
      "latin1",
    );
    expect(() => decodeNpy(flat)).toThrowError(/2D/);
  });
});
