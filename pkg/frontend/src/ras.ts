/**
 * Codec for the RAS raster container.
 *
 * Layout (little-endian): magic "CSR1", u32 width, u32 height, u32 dtype
 * (0 = u8, 1 = u16, 2 = u32, 3 = f32), then width * height samples in
 * row-major order. No padding, no checksum.
 */

export type RasDtype = "u8" | "u16" | "u32" | "f32";

const MAGIC = "CSR1";
const HEADER_BYTES = 16;

const DTYPE_CODES: Record<RasDtype, number> = { u8: 0, u16: 1, u32: 2, f32: 3 };
const CODE_DTYPES: RasDtype[] = ["u8", "u16", "u32", "f32"];
const ITEM_BYTES: Record<RasDtype, number> = { u8: 1, u16: 2, u32: 4, f32: 4 };

export type RasArray = Uint8Array | Uint16Array | Uint32Array | Float32Array;

export interface DecodedRas {
  width: number;
  height: number;
  dtype: RasDtype;
  data: RasArray;
}

export function encodeRas(
  width: number,
  height: number,
  dtype: RasDtype,
  values: ArrayLike<number>,
): Uint8Array {
  if (!Number.isInteger(width) || !Number.isInteger(height) || width < 1 || height < 1) {
    throw new RangeError(`invalid dimensions ${width}x${height}`);
  }
  if (values.length !== width * height) {
    throw new RangeError(
      `expected ${width * height} samples for ${width}x${height}, got ${values.length}`,
    );
  }
  const out = new Uint8Array(HEADER_BYTES + values.length * ITEM_BYTES[dtype]);
  const view = new DataView(out.buffer);
  for (let i = 0; i < 4; i++) out[i] = MAGIC.charCodeAt(i);
  view.setUint32(4, width, true);
  view.setUint32(8, height, true);
  view.setUint32(12, DTYPE_CODES[dtype], true);
  for (let i = 0; i < values.length; i++) {
    const offset = HEADER_BYTES + i * ITEM_BYTES[dtype];
    const v = values[i];
    switch (dtype) {
      case "u8":
        view.setUint8(offset, v);
        break;
      case "u16":
        view.setUint16(offset, v, true);
        break;
      case "u32":
        view.setUint32(offset, v, true);
        break;
      case "f32":
        view.setFloat32(offset, v, true);
        break;
    }
  }
  return out;
}

export function decodeRas(bytes: Uint8Array): DecodedRas {
  if (bytes.length < 4 || String.fromCharCode(...bytes.subarray(0, 4)) !== MAGIC) {
    throw new Error("not a RAS file: bad magic");
  }
  if (bytes.length < HEADER_BYTES) {
    throw new Error("truncated RAS header");
  }
  const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  const width = view.getUint32(4, true);
  const height = view.getUint32(8, true);
  const code = view.getUint32(12, true);
  const dtype = CODE_DTYPES[code];
  if (dtype === undefined) throw new Error(`unknown RAS dtype code ${code}`);
  if (width < 1 || height < 1) throw new Error("zero-sized RAS image");
  const count = width * height;
  if (bytes.length !== HEADER_BYTES + count * ITEM_BYTES[dtype]) {
    throw new Error(
      `truncated RAS payload: expected ${HEADER_BYTES + count * ITEM_BYTES[dtype]} bytes, got ${bytes.length}`,
    );
  }
  let data: RasArray;
  switch (dtype) {
    case "u8":
      data = new Uint8Array(count);
      for (let i = 0; i < count; i++) data[i] = view.getUint8(HEADER_BYTES + i);
      break;
    case "u16":
      data = new Uint16Array(count);
      for (let i = 0; i < count; i++) data[i] = view.getUint16(HEADER_BYTES + i * 2, true);
      break;
    case "u32":
      data = new Uint32Array(count);
      for (let i = 0; i < count; i++) data[i] = view.getUint32(HEADER_BYTES + i * 4, true);
      break;
    case "f32":
      data = new Float32Array(count);
      for (let i = 0; i < count; i++) data[i] = view.getFloat32(HEADER_BYTES + i * 4, true);
      break;
  }
  return { width, height, dtype, data };
}
