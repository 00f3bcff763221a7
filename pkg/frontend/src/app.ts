// DOM wiring for the steering UI: three orthogonal slice viewports with
// click-to-place annulus points, per-stage stepping with current/previous
// contour comparison, undo/accept, surface preview and export.
//
// Mutating calls are serialized: controls are disabled while one is in flight.

import { Client, ServiceError, type StepSummary } from "./api.js";
import {
  clickToWorld,
  indexToViewport,
  remainingAxes,
  type Axis,
  type VolumeGeometry,
} from "./geometry.js";
import {
  centerViewports,
  clampIndex,
  initialViewState,
  overlayFlags,
  removePoint,
  stepStageFor,
  type ViewState,
} from "./state.js";
import { SurfaceViewer } from "./viewer3d.js";

const AXES: Axis[] = ["I", "J", "K"];

export class App {
  state: ViewState = initialViewState();
  private client: Client;
  private viewer: SurfaceViewer | null = null;

  constructor(private root: HTMLElement, baseUrl: string) {
    this.client = new Client(baseUrl);
    this.root.innerHTML = TEMPLATE;
    this.bind();
  }

  private el<T extends HTMLElement>(selector: string): T {
    const node = this.root.querySelector(selector);
    if (!node) throw new Error(`missing element ${selector}`);
    return node as T;
  }

  private bind(): void {
    this.el<HTMLButtonElement>("#load-phantom").onclick = () => {
      void this.run(async () => {
        const summary = await this.client.createPhantomSession();
        this.state.sessionId = summary.id;
        this.state.stage = summary.stage;
        centerViewports(this.state, summary as VolumeGeometry);
        this.state.annulusPoints = [];
      });
    };
    this.el<HTMLInputElement>("#volume-file").onchange = (event) => {
      const file = (event.target as HTMLInputElement).files?.[0];
      if (!file) return;
      void this.run(async () => {
        const summary = await this.client.createVolumeSession(await file.arrayBuffer());
        this.state.sessionId = summary.id;
        this.state.stage = summary.stage;
        centerViewports(this.state, summary as VolumeGeometry);
        this.state.annulusPoints = [];
      });
    };
    this.el<HTMLButtonElement>("#fit-annulus").onclick = () => {
      void this.run(async () => {
        const summary = await this.client.setAnnulus(
          this.state.sessionId!, this.state.annulusPoints);
        this.state.stage = "ANNULUS_SET";
        this.status(`annulus fitted: radius ${summary.max_radius.toFixed(1)} mm`);
      });
    };
    this.el<HTMLButtonElement>("#clear-points").onclick = () => {
      this.state.annulusPoints = [];
      this.render();
    };
    this.el<HTMLButtonElement>("#step").onclick = () => {
      const stage = stepStageFor(this.state.stage);
      if (!stage) return;
      void this.run(async () => {
        const summary = await this.client.step(
          this.state.sessionId!, stage, this.state.stepIncrement);
        this.applyStep(summary);
      });
    };
    this.el<HTMLButtonElement>("#undo").onclick = () => {
      void this.run(async () => {
        this.applyStep(await this.client.undo(this.state.sessionId!));
      });
    };
    this.el<HTMLButtonElement>("#accept").onclick = () => {
      const stage = stepStageFor(this.state.stage);
      if (!stage) return;
      void this.run(async () => {
        const result = await this.client.accept(this.state.sessionId!, stage);
        this.state.stage = result.stage;
      });
    };
    this.el<HTMLButtonElement>("#extract").onclick = () => {
      void this.run(async () => {
        const surfaces = await this.client.extractSurface(this.state.sessionId!);
        this.state.stage = "SURFACE_READY";
        const buffer = await this.client.download(
          this.state.sessionId!, "PROXIMAL_MESH", "stl");
        if (!this.viewer) {
          this.viewer = new SurfaceViewer(this.el("#viewer"));
        }
        const shown = this.viewer.showStl(buffer);
        this.status(`proximal surface: ${shown} triangles `
          + `(server: ${surfaces.proximal_mesh.triangles})`);
      });
    };
    for (const what of ["PROXIMAL_MESH", "LEAFLET_MESH"]) {
      for (const ext of ["stl", "ply"]) {
        this.el<HTMLButtonElement>(`#dl-${what}-${ext}`.toLowerCase()).onclick = () => {
          const a = document.createElement("a");
          a.href = this.client.exportUrl(this.state.sessionId!, what, ext);
          a.download = `${what.toLowerCase()}.${ext}`;
          a.click();
        };
      }
    }
    const increment = this.el<HTMLInputElement>("#increment");
    increment.onchange = () => {
      this.state.stepIncrement = Math.max(1, Number(increment.value) || 1);
    };
    for (const flag of ["cur", "prev", "annulus"] as const) {
      this.el<HTMLInputElement>(`#ov-${flag}`).onchange = (event) => {
        this.state.overlays[flag] = (event.target as HTMLInputElement).checked;
        this.render();
      };
    }
    AXES.forEach((axis, n) => {
      const img = this.el<HTMLImageElement>(`#slice-${axis}`);
      img.onclick = (event) => this.onSliceClick(n, event);
      const slider = this.el<HTMLInputElement>(`#idx-${axis}`);
      slider.oninput = () => {
        if (!this.state.geometry) return;
        this.state.viewports[n].index = clampIndex(
          this.state.geometry, axis, Number(slider.value));
        this.render();
      };
    });
  }

  private onSliceClick(viewport: number, event: MouseEvent): void {
    const { geometry, sessionId, stage } = this.state;
    if (!geometry || !sessionId) return;
    if (stage !== "VOLUME_LOADED" && stage !== "ANNULUS_SET") return;
    const img = event.currentTarget as HTMLImageElement;
    const rect = img.getBoundingClientRect();
    const vp = this.state.viewports[viewport];
    const world = clickToWorld(geometry, vp.axis, vp.index,
      event.clientX, event.clientY, rect);
    if (world === null) {
      this.status("click outside the image ignored");
      return;
    }
    this.state.annulusPoints.push(world);
    this.render();
  }

  private applyStep(summary: StepSummary): void {
    this.state.stage = summary.stage;
    const volume = summary.inside_volume_mm3.toFixed(0);
    const note = summary.status === "CONTOUR_COLLAPSED"
      ? "contour collapsed - step discarded, use Undo or fewer iterations"
      : `${summary.iterations_done} iterations, ${volume} mm^3`
        + (summary.checksum ? `, state ${summary.checksum.slice(0, 8)}` : "");
    this.status(note);
  }

  private async run(action: () => Promise<void>): Promise<void> {
    if (this.state.busy) return;
    this.state.busy = true;
    this.render();
    try {
      await action();
    } catch (error) {
      if (error instanceof ServiceError) {
        this.status(`${error.body.code}: ${error.body.message}`);
      } else {
        this.status(String(error));
      }
    } finally {
      this.state.busy = false;
      this.render();
    }
  }

  private status(text: string): void {
    this.el("#status").textContent = text;
  }

  render(): void {
    const { geometry, sessionId, busy } = this.state;
    const stepStage = stepStageFor(this.state.stage);
    this.el("#stage").textContent = this.state.stage;
    const setDisabled = (selector: string, disabled: boolean) => {
      this.el<HTMLButtonElement>(selector).disabled = disabled;
    };
    setDisabled("#fit-annulus", busy || this.state.annulusPoints.length < 6);
    setDisabled("#step", busy || !stepStage);
    setDisabled("#undo", busy
      || (this.state.stage !== "BP_ACTIVE" && this.state.stage !== "LEAFLET_ACTIVE"));
    setDisabled("#accept", busy || !stepStage);
    setDisabled("#extract", busy || this.state.stage !== "LEAFLET_ACCEPTED");
    if (!geometry || !sessionId) return;

    const flags = overlayFlags(this.state);
    AXES.forEach((axis, n) => {
      const vp = this.state.viewports[n];
      const img = this.el<HTMLImageElement>(`#slice-${axis}`);
      img.src = this.client.sliceUrl(sessionId, vp.axis, vp.index, flags)
        + `&_v=${Date.now()}`;
      const slider = this.el<HTMLInputElement>(`#idx-${axis}`);
      slider.max = String(geometry.dims[n] - 1);
      slider.value = String(vp.index);
      this.drawMarkers(n);
    });
    this.renderPointList();
  }

  private drawMarkers(viewport: number): void {
    const { geometry } = this.state;
    if (!geometry) return;
    const vp = this.state.viewports[viewport];
    const layer = this.el<HTMLElement>(`#markers-${vp.axis}`);
    layer.innerHTML = "";
    const img = this.el<HTMLImageElement>(`#slice-${vp.axis}`);
    const rect = { left: 0, top: 0, width: img.clientWidth || geometry.dims[0],
                   height: img.clientHeight || geometry.dims[1] };
    const axisNumber = { I: 0, J: 1, K: 2 }[vp.axis];
    this.state.annulusPoints.forEach((p, i) => {
      // world -> index via the inverse mapping (orientation transpose)
      const rel = [p.x - geometry.origin[0], p.y - geometry.origin[1],
                   p.z - geometry.origin[2]];
      const m = geometry.orientation;
      const ijk: [number, number, number] = [0, 1, 2].map((r) =>
        (m[0][r] * rel[0] + m[1][r] * rel[1] + m[2][r] * rel[2]) / geometry.spacing[r],
      ) as [number, number, number];
      if (Math.abs(ijk[axisNumber] - vp.index) > 0.5) return;
      const pos = indexToViewport(geometry, vp.axis, ijk, rect);
      const marker = document.createElement("div");
      marker.className = "marker";
      marker.style.left = `${pos.x - 4}px`;
      marker.style.top = `${pos.y - 4}px`;
      marker.title = `point ${i + 1}`;
      marker.ondblclick = () => {
        removePoint(this.state, i);
        this.render();
      };
      layer.appendChild(marker);
    });
  }

  private renderPointList(): void {
    const list = this.el("#points");
    list.innerHTML = "";
    this.state.annulusPoints.forEach((p, i) => {
      const item = document.createElement("li");
      item.textContent = `(${p.x.toFixed(1)}, ${p.y.toFixed(1)}, ${p.z.toFixed(1)})`;
      const del = document.createElement("button");
      del.textContent = "x";
      del.onclick = () => {
        removePoint(this.state, i);
        this.render();
      };
      item.appendChild(del);
      list.appendChild(item);
    });
  }
}

const TEMPLATE = `
<header>
  <button id="load-phantom">Load phantom</button>
  <label>or NRRD volume <input type="file" id="volume-file" accept=".nrrd"></label>
  <span id="stage" class="stage">NEW</span>
  <span id="status"></span>
</header>
<section class="viewports">
  ${["I", "J", "K"].map((axis) => `
  <figure>
    <figcaption>${axis}</figcaption>
    <div class="slice-wrap">
      <img id="slice-${axis}" alt="slice ${axis}">
      <div id="markers-${axis}" class="markers"></div>
    </div>
    <input type="range" id="idx-${axis}" min="0" max="0" value="0">
  </figure>`).join("")}
</section>
<section class="controls">
  <fieldset>
    <legend>Annulus</legend>
    <button id="fit-annulus">Fit annulus</button>
    <button id="clear-points">Clear</button>
    <ol id="points"></ol>
  </fieldset>
  <fieldset>
    <legend>Stepping</legend>
    <label>increment <input id="increment" type="number" value="25" min="1"></label>
    <button id="step">Step</button>
    <button id="undo">Undo</button>
    <button id="accept">Accept stage</button>
    <label><input type="checkbox" id="ov-cur" checked> current</label>
    <label><input type="checkbox" id="ov-prev" checked> previous</label>
    <label><input type="checkbox" id="ov-annulus" checked> annulus</label>
  </fieldset>
  <fieldset>
    <legend>Surface</legend>
    <button id="extract">Extract proximal surface</button>
    <button id="dl-proximal_mesh-stl">STL</button>
    <button id="dl-proximal_mesh-ply">PLY</button>
    <button id="dl-leaflet_mesh-stl">leaflet STL</button>
    <button id="dl-leaflet_mesh-ply">leaflet PLY</button>
  </fieldset>
</section>
<section id="viewer" class="viewer"></section>
`;
