/** Minimal server-sent-events wire parser over a byte stream. */

export interface SseEvent {
  id: number | null;
  event: string;
  data: string;
}

/** Split a byte stream into SSE frames.
 *
 * Frames are blocks separated by a blank line; each block may carry `id:`,
 * `event:` and one or more `data:` lines (joined with newlines, per the
 * SSE format).  Comment lines starting with ":" are ignored, so blocks
 * that are pure keep-alive comments never reach the caller.
 */
export async function* parseSseStream(
  stream: ReadableStream<Uint8Array>,
): AsyncGenerator<SseEvent> {
  const reader = stream.getReader();
  const decoder = new TextDecoder();
  const sep = /\r\n\r\n|\n\n|\r\r/;
  let buffer = "";
  try {
    while (true) {
      const { done, value } = await reader.read();
      if (done) break;
      buffer += decoder.decode(value, { stream: true });
      let m: RegExpExecArray | null;
      while ((m = sep.exec(buffer)) !== null) {
        const block = buffer.slice(0, m.index);
        buffer = buffer.slice(m.index + m[0].length);
        const ev = parseBlock(block);
        if (ev !== null) yield ev;
      }
    }
    const tail = parseBlock(buffer);
    if (tail !== null) yield tail;
  } finally {
    reader.releaseLock();
  }
}

function parseBlock(block: string): SseEvent | null {
  let id: number | null = null;
  let event = "message";
  const data: string[] = [];
  let sawField = false;
  for (const raw of block.split("\n")) {
    const line = raw.replace(/\r$/, "");
    if (line === "" || line.startsWith(":")) continue;
    sawField = true;
    const colon = line.indexOf(":");
    const field = colon < 0 ? line : line.slice(0, colon);
    let value = colon < 0 ? "" : line.slice(colon + 1);
    if (value.startsWith(" ")) value = value.slice(1);
    if (field === "id") {
      const n = Number.parseInt(value, 10);
      id = Number.isNaN(n) ? null : n;
    } else if (field === "event") {
      event = value;
    } else if (field === "data") {
      data.push(value);
    }
  }
  if (!sawField) return null;
  return { id, event, data: data.join("\n") };
}
