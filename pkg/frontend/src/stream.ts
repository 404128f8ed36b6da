// NDJSON event stream subscription with automatic reconnect.
//
// The server replays the whole history from tick 0 on every connect, so
// a reconnect simply resets the consumer and replays; no client-side
// cursors are needed.

import type { SessionEvent } from "./types.js";

export interface StreamOptions {
  /** Called before events arrive on each (re)connect. */
  onConnect?: () => void;
  onError?: (error: unknown) => void;
  /** Initial reconnect delay in ms (doubles up to 10s). */
  backoffMs?: number;
  fetchImpl?: typeof fetch;
}

export interface StreamHandle {
  close(): void;
  /** Resolves when the stream ends cleanly (session finished) or is closed. */
  done: Promise<void>;
}

export function subscribeEvents(
  url: string,
  onEvent: (event: SessionEvent) => void,
  options: StreamOptions = {},
): StreamHandle {
  const fetchImpl = options.fetchImpl ?? fetch;
  let closed = false;
  let controller: AbortController | null = null;
  let backoff = options.backoffMs ?? 500;

  const done = (async () => {
    while (!closed) {
      controller = new AbortController();
      try {
        const response = await fetchImpl(url, { signal: controller.signal });
        if (!response.ok || !response.body) {
          throw new Error(`event stream failed: HTTP ${response.status}`);
        }
        options.onConnect?.();
        backoff = options.backoffMs ?? 500;
        const reader = response.body.getReader();
        const decoder = new TextDecoder();
        let buffer = "";
        for (;;) {
          const { value, done: eof } = await reader.read();
          if (eof) break;
          buffer += decoder.decode(value, { stream: true });
          let newline = buffer.indexOf("\n");
          while (newline >= 0) {
            const line = buffer.slice(0, newline).trim();
            buffer = buffer.slice(newline + 1);
            if (line) onEvent(JSON.parse(line) as SessionEvent);
            newline = buffer.indexOf("\n");
          }
        }
        return; // clean end of stream: session is finished
      } catch (error) {
        if (closed) return;
        options.onError?.(error);
        await new Promise((resolve) => setTimeout(resolve, backoff));
        backoff = Math.min(backoff * 2, 10_000);
      }
    }
  })();

  return {
    close() {
      closed = true;
      controller?.abort();
    },
    done,
  };
}
