/** Typed client for the /v1 translation service. */

export interface SchemaInfo {
  n: number;
  names: string[];
  mode: "one_hot" | "multi_hot";
  exclusivity_groups: number[][];
  gate_enabled: boolean;
  image_size: number;
  native_size: number;
  checkpoint_digest: string;
}

export interface TranslateResponse {
  image: string;
  resolved_label: number[];
  resolved_alpha: number[];
  latency_ms: number;
  native_size: number;
}

export interface ContentResponse {
  image: string;
  latency_ms: number;
  native_size: number;
}

export interface HealthzResponse {
  status: string;
  model_loaded: boolean;
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    public readonly detail: string,
  ) {
    super(`${code} (${status}): ${detail}`);
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

async function parseOrThrow<T>(response: Response): Promise<T> {
  let body: unknown;
  try {
    body = await response.json();
  } catch {
    throw new ApiError(response.status, "bad_response", "response was not JSON");
  }
  if (!response.ok) {
    const err = body as { error?: string; detail?: string };
    throw new ApiError(response.status, err.error ?? "http_error",
      err.detail ?? response.statusText);
  }
  return body as T;
}

export class Client {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  healthz(): Promise<HealthzResponse> {
    return this.fetchFn(this.url("/v1/healthz")).then((r) =>
      parseOrThrow<HealthzResponse>(r));
  }

  schema(): Promise<SchemaInfo> {
    return this.fetchFn(this.url("/v1/schema")).then((r) =>
      parseOrThrow<SchemaInfo>(r));
  }

  translate(req: {
    image: string;
    set: Record<string, number>;
    alpha: Record<string, number>;
    source?: Record<string, number>;
  }): Promise<TranslateResponse> {
    return this.fetchFn(this.url("/v1/translate"), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(req),
    }).then((r) => parseOrThrow<TranslateResponse>(r));
  }

  content(imageB64: string): Promise<ContentResponse> {
    return this.fetchFn(this.url("/v1/content"), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ image: imageB64 }),
    }).then((r) => parseOrThrow<ContentResponse>(r));
  }
}
