/** Input sandbox packing in the browser: a minimal POSIX tar writer piped
 * through gzip (CompressionStream). */

function headerBlock(name: string, size: number): Uint8Array {
  if (name.startsWith("/") || name.split("/").includes("..")) {
    throw new Error(`entry path escapes the sandbox root: ${name}`);
  }
  const nameBytes = new TextEncoder().encode(name);
  if (nameBytes.length > 100) throw new Error(`entry name too long: ${name}`);
  const block = new Uint8Array(512);
  block.set(nameBytes, 0);
  const octal = (value: number, length: number, at: number) => {
    const text = value.toString(8).padStart(length - 1, "0") + "\0";
    block.set(new TextEncoder().encode(text), at);
  };
  octal(0o644, 8, 100); // mode
  octal(0, 8, 108); // uid
  octal(0, 8, 116); // gid
  octal(size, 12, 124);
  octal(Math.floor(Date.now() / 1000), 12, 136);
  block.set(new TextEncoder().encode("        "), 148); // checksum spaces
  block[156] = 0x30; // typeflag '0': regular file
  block.set(new TextEncoder().encode("ustar\0"), 257);
  block.set(new TextEncoder().encode("00"), 263);
  let checksum = 0;
  for (const byte of block) checksum += byte;
  const checksumText = checksum.toString(8).padStart(6, "0") + "\0 ";
  block.set(new TextEncoder().encode(checksumText), 148);
  return block;
}

export function buildTar(entries: Array<[string, Uint8Array]>): Uint8Array {
  const parts: Uint8Array[] = [];
  for (const [name, data] of entries) {
    parts.push(headerBlock(name, data.length));
    parts.push(data);
    const pad = (512 - (data.length % 512)) % 512;
    if (pad) parts.push(new Uint8Array(pad));
  }
  parts.push(new Uint8Array(1024)); // end-of-archive marker
  const total = parts.reduce((n, p) => n + p.length, 0);
  const out = new Uint8Array(total);
  let at = 0;
  for (const part of parts) {
    out.set(part, at);
    at += part.length;
  }
  return out;
}

export async function buildTarGz(entries: Array<[string, Uint8Array]>): Promise<Uint8Array> {
  const tar = buildTar(entries);
  const stream = new Blob([tar as unknown as BlobPart])
    .stream()
    .pipeThrough(new CompressionStream("gzip"));
  return new Uint8Array(await new Response(stream).arrayBuffer());
}
