/** Typed client for the session service. The UI mutates state only through here. */

export type SentenceStatus = "machine" | "human" | "regenerating" | "fallback";
export type Provenance = "llm" | "nmt_fallback" | "human";

export interface SnapshotRow {
  index: number;
  src: string;
  nmt_hyp: string;
  output: string;
  status: SentenceStatus;
  provenance: Provenance;
}

export interface Snapshot {
  revision: number;
  doc_id?: string;
  sentences: SnapshotRow[];
}

export interface SessionSummary {
  session_id: string;
  doc_id: string;
  revision: number;
  n: number;
}

export interface PrfEntry {
  p: number;
  r: number;
  f1: number;
  hyp_tags: number;
  ref_tags: number;
  matched: number;
}

export interface MetricsResponse {
  report: {
    bleu: number;
    chrf2: number;
    tags: Record<string, PrfEntry>;
    counts: Record<string, number>;
  };
  edit_effort: { per_sentence: number[]; total: number };
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

async function parseError(response: Response): Promise<ApiError> {
  try {
    const body = (await response.json()) as { code?: string; message?: string };
    return new ApiError(response.status, body.code ?? "unknown", body.message ?? response.statusText);
  } catch {
    return new ApiError(response.status, "unknown", response.statusText);
  }
}

export class ApiClient {
  constructor(private baseUrl: string = "") {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await fetch(this.baseUrl + path, {
      headers: { "Content-Type": "application/json" },
      ...init,
    });
    if (!response.ok) {
      throw await parseError(response);
    }
    if (response.status === 204) {
      return undefined as T;
    }
    return (await response.json()) as T;
  }

  listSessions(): Promise<SessionSummary[]> {
    return this.request("/api/sessions");
  }

  createSession(body: {
    document: { doc_id: string; sentences: string[] };
    strategy?: string;
    chunk_limit?: number;
    backends: { nmt: string; llm: string };
  }): Promise<{ session_id: string; revision: number }> {
    return this.request("/api/sessions", { method: "POST", body: JSON.stringify(body) });
  }

  getSession(sessionId: string, since?: number): Promise<Snapshot> {
    const query = since === undefined ? "" : `?since=${since}`;
    return this.request(`/api/sessions/${sessionId}${query}`);
  }

  submitEdit(sessionId: string, index: number, text: string): Promise<{ revision: number }> {
    return this.request(`/api/sessions/${sessionId}/edits`, {
      method: "POST",
      body: JSON.stringify({ index, text }),
    });
  }

  getMetrics(sessionId: string, references: string[]): Promise<MetricsResponse> {
    return this.request(`/api/sessions/${sessionId}/metrics`, {
      method: "POST",
      body: JSON.stringify({ references }),
    });
  }

  deleteSession(sessionId: string): Promise<void> {
    return this.request(`/api/sessions/${sessionId}`, { method: "DELETE" });
  }
}
