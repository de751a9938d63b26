/** Wire types mirrored from the /v1 JSON API. */

export interface Grounding {
  label: string;
  bbox: [number, number, number, number]; // x0, y0, x1, y1 in [0,1]
  confidence: number;
}

export interface QueryResponse {
  decision: "proceed" | "refuse";
  reason_code?: string;
  message?: string;
  grounding?: Grounding;
  cloud_id?: string;
  affordance?: string;
  scores?: number[];
  scores_token?: string;
  transform?: { rotation: number[][]; translation: number[] };
  timing_ms: Record<string, number>;
}

export interface ImageSummary {
  image_id: string;
  scene_id: string;
  labels: string[];
}

export interface CloudPayload {
  id: string;
  label: string;
  points: [number, number, number][];
  gt_map_names: string[];
}

export interface HealthResponse {
  status: "ok" | "empty";
  versions: Record<string, string>;
}
