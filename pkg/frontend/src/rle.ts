// Decoder/encoder for the mask sidecar RLE format (docs/mask-format.md).
// Must stay bit-equivalent to the pipeline's own codec; the shared fixture
// corpus in fixtures/rle_corpus.json pins that equivalence.

export interface DecodedMask {
  chamber: string;
  frame: number;
  rows: number;
  cols: number;
  bits: Uint8Array; // row-major 0/1
}

export class MalformedSidecar extends Error {}

const CHAMBERS = new Set(["LV", "LA"]);

export function decodeRecord(record: string): DecodedMask {
  const lines = record.replace(/\n+$/, "").split("\n");
  if (lines.length !== 2) {
    throw new MalformedSidecar(`expected header and runs lines, got ${lines.length}`);
  }
  const fields = lines[0].split(",");
  if (fields.length !== 4) {
    throw new MalformedSidecar(`bad header ${lines[0]}`);
  }
  const [chamber, frameS, rowsS, colsS] = fields;
  if (!CHAMBERS.has(chamber)) {
    throw new MalformedSidecar(`unknown chamber ${chamber}`);
  }
  const frame = parseStrictInt(frameS);
  const rows = parseStrictInt(rowsS);
  const cols = parseStrictInt(colsS);
  if (rows < 1 || cols < 1 || frame < 0) {
    throw new MalformedSidecar(`bad dimensions in header ${lines[0]}`);
  }
  const runs = lines[1].split(",").map(parseStrictInt);
  if (runs.length === 0 || runs.some((r) => r < 0) || runs.slice(1).some((r) => r === 0)) {
    throw new MalformedSidecar(`bad run lengths ${lines[1]}`);
  }
  const total = runs.reduce((a, b) => a + b, 0);
  if (total !== rows * cols) {
    throw new MalformedSidecar(`runs sum to ${total}, expected ${rows * cols}`);
  }
  const bits = new Uint8Array(rows * cols);
  let pos = 0;
  let value = 0;
  for (const run of runs) {
    if (value === 1) {
      bits.fill(1, pos, pos + run);
    }
    pos += run;
    value = 1 - value;
  }
  return { chamber, frame, rows, cols, bits };
}

export function encodeRecord(mask: DecodedMask): string {
  const runs: number[] = [];
  let current = 0;
  let length = 0;
  for (const bit of mask.bits) {
    if (bit === current) {
      length += 1;
    } else {
      runs.push(length);
      current = bit;
      length = 1;
    }
  }
  runs.push(length);
  const header = `${mask.chamber},${mask.frame},${mask.rows},${mask.cols}`;
  return `${header}\n${runs.join(",")}\n`;
}

export function decodeSidecar(text: string): DecodedMask[] {
  const body = text.replace(/\n+$/, "");
  if (body === "") {
    return [];
  }
  const lines = body.split("\n");
  if (lines.length % 2 !== 0) {
    throw new MalformedSidecar("sidecar must hold an even number of lines");
  }
  const masks: DecodedMask[] = [];
  for (let i = 0; i < lines.length; i += 2) {
    masks.push(decodeRecord(`${lines[i]}\n${lines[i + 1]}\n`));
  }
  return masks;
}

function parseStrictInt(text: string): number {
  if (!/^-?\d+$/.test(text)) {
    throw new MalformedSidecar(`unparseable integer ${text}`);
  }
  return parseInt(text, 10);
}
