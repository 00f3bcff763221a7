// View state: the only client-side state besides the DOM. Everything
// segmentation-related lives on the server.

import type { Axis, Vec3, VolumeGeometry } from "./geometry.js";

export interface ViewportState {
  axis: Axis;
  index: number;
}

export interface ViewState {
  sessionId: string | null;
  geometry: VolumeGeometry | null;
  stage: string;
  viewports: [ViewportState, ViewportState, ViewportState];
  overlays: { cur: boolean; prev: boolean; annulus: boolean };
  stepIncrement: number;
  annulusPoints: Vec3[];
  busy: boolean;
}

export function initialViewState(): ViewState {
  return {
    sessionId: null,
    geometry: null,
    stage: "NEW",
    viewports: [
      { axis: "I", index: 0 },
      { axis: "J", index: 0 },
      { axis: "K", index: 0 },
    ],
    overlays: { cur: true, prev: true, annulus: true },
    stepIncrement: 25,
    annulusPoints: [],
    busy: false,
  };
}

export function centerViewports(state: ViewState, geom: VolumeGeometry): void {
  state.geometry = geom;
  state.viewports.forEach((vp, n) => {
    vp.index = Math.floor(geom.dims[n] / 2);
  });
}

export function clampIndex(geom: VolumeGeometry, axis: Axis, index: number): number {
  const max = geom.dims[{ I: 0, J: 1, K: 2 }[axis]] - 1;
  return Math.min(Math.max(index, 0), max);
}

export function overlayFlags(state: ViewState): string[] {
  const flags: string[] = [];
  if (state.overlays.cur) flags.push("cur");
  if (state.overlays.prev) flags.push("prev");
  if (state.overlays.annulus) flags.push("annulus");
  return flags;
}

/** Which stage a step command addresses, given the server-reported stage. */
export function stepStageFor(stage: string): "BLOODPOOL" | "LEAFLET" | null {
  if (stage === "ANNULUS_SET" || stage === "BP_ACTIVE") return "BLOODPOOL";
  if (stage === "BP_ACCEPTED" || stage === "LEAFLET_ACTIVE") return "LEAFLET";
  return null;
}

export function removePoint(state: ViewState, index: number): void {
  state.annulusPoints.splice(index, 1);
}

export function movePoint(state: ViewState, from: number, to: number): void {
  if (from === to || from < 0 || from >= state.annulusPoints.length) return;
  const [p] = state.annulusPoints.splice(from, 1);
  state.annulusPoints.splice(Math.min(Math.max(to, 0), state.annulusPoints.length), 0, p);
}
