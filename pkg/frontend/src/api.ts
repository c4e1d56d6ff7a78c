import {
  Axis,
  ClickClass,
  PredictResult,
  SessionMeta,
  SliceResponse,
  predictResultSchema,
  sessionMetaSchema,
  sliceSchema,
} from "./types";

export class ApiError extends Error {
  constructor(public status: number, public detail: string) {
    super(`HTTP ${status}: ${detail}`);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/**
 * Thin typed wrapper over the annotation service REST API. All segmentation
 * state lives on the server; this client never touches anything else.
 */
export class ApiClient {
  constructor(
    private baseUrl: string,
    private fetchFn: FetchLike = (input, init) => fetch(input, init)
  ) {}

  private async request(method: string, path: string, body?: unknown): Promise<unknown> {
    const res = await this.fetchFn(this.baseUrl + path, {
      method,
      headers: body !== undefined ? { "Content-Type": "application/json" } : undefined,
      body: body !== undefined ? JSON.stringify(body) : undefined,
    });
    const payload: unknown = await res.json().catch(() => ({}));
    if (!res.ok) {
      const detail =
        typeof payload === "object" && payload !== null && "detail" in payload
          ? String((payload as { detail: unknown }).detail)
          : res.statusText;
      throw new ApiError(res.status, detail);
    }
    return payload;
  }

  async createSession(body: {
    path?: string;
    label_path?: string;
    dims?: [number, number, number];
    data_b64?: string;
  }): Promise<{ id: string }> {
    const out = (await this.request("POST", "/sessions", body)) as { id: string };
    return out;
  }

  async getSession(sid: string): Promise<SessionMeta> {
    return sessionMetaSchema.parse(await this.request("GET", `/sessions/${sid}`));
  }

  async addClick(sid: string, pos: [number, number, number], cls: ClickClass): Promise<void> {
    await this.request("POST", `/sessions/${sid}/clicks`, { pos, cls });
  }

  async undoClick(sid: string): Promise<void> {
    await this.request("DELETE", `/sessions/${sid}/clicks/last`);
  }

  async predict(sid: string): Promise<PredictResult> {
    return predictResultSchema.parse(await this.request("POST", `/sessions/${sid}/predict`));
  }

  async getSlice(sid: string, axis: Axis, index: number): Promise<SliceResponse> {
    return sliceSchema.parse(
      await this.request("GET", `/sessions/${sid}/slice?axis=${axis}&index=${index}`)
    );
  }
}
