// Thin typed client over the session service. Every call maps 1:1 onto
// an endpoint; no state is kept here.

import type {
  ActionBody,
  ActionOutcome,
  ApiErrorBody,
  Mode,
  PackInfo,
  ReportView,
  StateView,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
  }
}

async function decode<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let body: ApiErrorBody | null = null;
    try {
      body = (await response.json()) as ApiErrorBody;
    } catch {
      // non-JSON error body; fall through to the generic error
    }
    throw new ApiError(
      response.status,
      body?.code ?? "http_error",
      body?.message ?? `HTTP ${response.status}`,
    );
  }
  return (await response.json()) as T;
}

export class VlabApi {
  constructor(readonly baseUrl: string) {}

  private url(path: string): string {
    return `${this.baseUrl.replace(/\/$/, "")}${path}`;
  }

  async listPacks(): Promise<PackInfo[]> {
    return decode(await fetch(this.url("/packs")));
  }

  async createSession(
    packId: string,
    mode: Mode,
    procedureId?: string,
  ): Promise<StateView> {
    const body: Record<string, unknown> = { pack_id: packId, mode };
    if (procedureId !== undefined) body.procedure_id = procedureId;
    return decode(
      await fetch(this.url("/sessions"), {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(body),
      }),
    );
  }

  async getState(sessionId: string): Promise<StateView> {
    return decode(await fetch(this.url(`/sessions/${sessionId}/state`)));
  }

  async postAction(sessionId: string, action: ActionBody): Promise<ActionOutcome> {
    return decode(
      await fetch(this.url(`/sessions/${sessionId}/actions`), {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(action),
      }),
    );
  }

  async finish(sessionId: string): Promise<ReportView> {
    return decode(
      await fetch(this.url(`/sessions/${sessionId}/finish`), { method: "POST" }),
    );
  }

  async getReport(sessionId: string): Promise<ReportView> {
    return decode(await fetch(this.url(`/sessions/${sessionId}/report`)));
  }

  eventsUrl(sessionId: string): string {
    return this.url(`/sessions/${sessionId}/events`);
  }
}
