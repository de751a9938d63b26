import type {
  CloudPayload,
  HealthResponse,
  ImageSummary,
  QueryResponse,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export class ConnectionError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "ConnectionError";
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** Thin typed client over the /v1 JSON API. All failures surface as either
 * ApiError (the server answered with a non-2xx status) or ConnectionError
 * (the server could not be reached at all). Refusals are ordinary 200
 * responses and come back as QueryResponse values. */
export class ApiClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let res: Response;
    try {
      res = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    } catch (e) {
      throw new ConnectionError(`cannot reach ${this.baseUrl}: ${String(e)}`);
    }
    let body: unknown = null;
    try {
      body = await res.json();
    } catch {
      if (res.ok) throw new ApiError(res.status, "malformed JSON response");
    }
    if (!res.ok) {
      const detail =
        body && typeof body === "object" && "error" in body
          ? String((body as { error: unknown }).error)
          : res.statusText;
      throw new ApiError(res.status, detail);
    }
    return body as T;
  }

  health(): Promise<HealthResponse> {
    return this.request("/v1/health");
  }

  async listImages(): Promise<ImageSummary[]> {
    const doc = await this.request<{ images: ImageSummary[] }>("/v1/images");
    return doc.images;
  }

  imageUrl(imageId: string): string {
    return `${this.baseUrl}/v1/images/${encodeURIComponent(imageId)}`;
  }

  /** Run the pipeline; when the response is too large to inline its scores,
   * transparently follow the scores_token indirection. */
  async query(text: string, imageId: string): Promise<QueryResponse> {
    const doc = await this.request<QueryResponse>("/v1/query", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ text, image_id: imageId }),
    });
    if (doc.decision === "proceed" && doc.scores === undefined && doc.scores_token) {
      const fetched = await this.request<{ scores: number[] }>(
        `/v1/scores/${encodeURIComponent(doc.scores_token)}`,
      );
      doc.scores = fetched.scores;
    }
    return doc;
  }

  getCloud(cloudId: string): Promise<CloudPayload> {
    return this.request(`/v1/clouds/${encodeURIComponent(cloudId)}`);
  }
}
