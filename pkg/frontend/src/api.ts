// Typed client for the session service. The UI holds no segmentation state;
// every displayed artifact comes from these calls.

import type { VolumeGeometry, Vec3 } from "./geometry.js";

export interface SessionSummary extends VolumeGeometry {
  id: string;
  stage: string;
  bp_snapshots: number;
  leaflet_snapshots: number;
  inside_volume_mm3?: number;
  iterations_done?: number;
  annulus?: AnnulusSummary;
  surfaces?: SurfaceSummary;
}

export interface AnnulusSummary {
  centroid: [number, number, number];
  plane_normal: [number, number, number];
  plane_offset: number;
  probe_dir: [number, number, number];
  max_radius: number;
  samples: [number, number, number][];
}

export interface StepSummary {
  stage: string;
  iterations_done: number;
  inside_volume_mm3: number;
  status: string;
  checksum: string | null;
}

export interface MeshCounts {
  vertices: number;
  triangles: number;
}

export interface SurfaceSummary {
  leaflet_mesh: MeshCounts;
  bloodpool_mesh: MeshCounts;
  proximal_mesh: MeshCounts;
}

export interface ApiError {
  code: string;
  message: string;
  detail?: string | null;
}

export class ServiceError extends Error {
  constructor(public status: number, public body: ApiError) {
    super(`${body.code}: ${body.message}`);
  }
}

async function asJson<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let body: ApiError;
    try {
      body = (await response.json()) as ApiError;
    } catch {
      body = { code: "HTTP", message: response.statusText };
    }
    throw new ServiceError(response.status, body);
  }
  return (await response.json()) as T;
}

export class Client {
  constructor(public baseUrl: string) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  async health(): Promise<{ status: string; version: string }> {
    return asJson(await fetch(this.url("/healthz")));
  }

  async createPhantomSession(phantom: Record<string, unknown> = {},
                             config: Record<string, unknown> = {}): Promise<SessionSummary> {
    return asJson(await fetch(this.url("/sessions"), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ phantom, config }),
    }));
  }

  async createVolumeSession(nrrd: ArrayBuffer): Promise<SessionSummary> {
    return asJson(await fetch(this.url("/sessions"), {
      method: "POST",
      headers: { "content-type": "application/octet-stream" },
      body: nrrd,
    }));
  }

  async getSession(id: string): Promise<SessionSummary> {
    return asJson(await fetch(this.url(`/sessions/${id}`)));
  }

  async setAnnulus(id: string, points: Vec3[],
                   probeDir?: [number, number, number]): Promise<AnnulusSummary> {
    return asJson(await fetch(this.url(`/sessions/${id}/annulus`), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ points, probe_dir: probeDir ?? null }),
    }));
  }

  async step(id: string, stage: "BLOODPOOL" | "LEAFLET",
             iterations: number): Promise<StepSummary> {
    return asJson(await fetch(this.url(`/sessions/${id}/steps`), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ stage, iterations }),
    }));
  }

  async undo(id: string): Promise<StepSummary> {
    return asJson(await fetch(this.url(`/sessions/${id}/undo`), { method: "POST" }));
  }

  async accept(id: string, stage: "BLOODPOOL" | "LEAFLET"): Promise<{ stage: string }> {
    return asJson(await fetch(this.url(`/sessions/${id}/accept`), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ stage }),
    }));
  }

  async extractSurface(id: string): Promise<SurfaceSummary> {
    return asJson(await fetch(this.url(`/sessions/${id}/surface`), { method: "POST" }));
  }

  sliceUrl(id: string, axis: string, index: number, overlays: string[]): string {
    const query = overlays.length ? `?overlay=${overlays.join(",")}` : "";
    return this.url(`/sessions/${id}/slices/${axis}/${index}${query}`);
  }

  exportUrl(id: string, what: string, ext: string): string {
    return this.url(`/sessions/${id}/export/${what}.${ext}`);
  }

  async download(id: string, what: string, ext: string): Promise<ArrayBuffer> {
    const response = await fetch(this.exportUrl(id, what, ext));
    if (!response.ok) {
      throw new ServiceError(response.status, (await response.json()) as ApiError);
    }
    return response.arrayBuffer();
  }
}
