// Typed client for the review service. The UI holds no authoritative
// state, so every mutation returns the server's ack and callers refetch.

import type {
  ActionAck,
  Corrections,
  CorrectionsAck,
  Inventory,
  LineDetail,
  LineSummary,
  RebuildResult,
} from "./types";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    public status: number,
    public reason: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function raise(resp: Response): Promise<never> {
  let reason = `http-${resp.status}`;
  let message = resp.statusText;
  try {
    const body = await resp.json();
    if (body && body.detail) {
      reason = body.detail.reason ?? reason;
      message = body.detail.message ?? JSON.stringify(body.detail);
    }
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ApiError(resp.status, reason, message);
}

export class ReviewApi {
  constructor(
    private base = "",
    private fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async get<T>(path: string): Promise<T> {
    const resp = await this.fetchImpl(this.base + path);
    if (!resp.ok) await raise(resp);
    return (await resp.json()) as T;
  }

  private async post<T>(path: string, body: unknown): Promise<T> {
    const resp = await this.fetchImpl(this.base + path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!resp.ok) await raise(resp);
    return (await resp.json()) as T;
  }

  lines(): Promise<LineSummary[]> {
    return this.get("/api/lines");
  }

  line(lineId: string): Promise<LineDetail> {
    return this.get(`/api/lines/${encodeURIComponent(lineId)}`);
  }

  inventory(mirrorSuggestions = false): Promise<Inventory> {
    const q = mirrorSuggestions ? "?mirror_suggestions=true" : "";
    return this.get(`/api/inventory${q}`);
  }

  submitCorrections(lineId: string, corrections: Corrections): Promise<CorrectionsAck> {
    return this.post("/api/corrections", { line_id: lineId, ...corrections });
  }

  mergeClasses(classIds: number[]): Promise<ActionAck> {
    return this.post("/api/classes/merge", { class_ids: classIds });
  }

  splitClass(classId: number, memberRefs: [string, number][]): Promise<ActionAck> {
    return this.post("/api/classes/split", { class_id: classId, member_refs: memberRefs });
  }

  mirrorClasses(classA: number, classB: number, value = true): Promise<ActionAck> {
    return this.post("/api/classes/mirror", { class_a: classA, class_b: classB, value });
  }

  rebuild(): Promise<RebuildResult> {
    return this.post("/api/rebuild", {});
  }
}
