// three.js preview of the extracted proximal surface with orbit controls.

import {
  AmbientLight,
  BufferAttribute,
  BufferGeometry,
  DirectionalLight,
  DoubleSide,
  Mesh,
  MeshStandardMaterial,
  PerspectiveCamera,
  Scene,
  WebGLRenderer,
} from "three";
import { OrbitControls } from "three/examples/jsm/controls/OrbitControls.js";

import { meshCenter, meshRadius, parseBinaryStl, type StlMesh } from "./stl.js";

export function geometryFromStl(mesh: StlMesh): BufferGeometry {
  const geometry = new BufferGeometry();
  geometry.setAttribute("position", new BufferAttribute(mesh.positions, 3));
  geometry.setAttribute("normal", new BufferAttribute(mesh.normals, 3));
  return geometry;
}

export class SurfaceViewer {
  private scene = new Scene();
  private camera: PerspectiveCamera;
  private renderer: WebGLRenderer;
  private controls: OrbitControls;
  private surface: Mesh | null = null;
  triangleCount = 0;

  constructor(private container: HTMLElement) {
    const width = container.clientWidth || 480;
    const height = container.clientHeight || 360;
    this.camera = new PerspectiveCamera(45, width / height, 0.1, 1000);
    this.renderer = new WebGLRenderer({ antialias: true });
    this.renderer.setSize(width, height);
    container.appendChild(this.renderer.domElement);
    this.scene.add(new AmbientLight(0xffffff, 0.45));
    const key = new DirectionalLight(0xffffff, 1.0);
    key.position.set(1, 1, 2);
    this.scene.add(key);
    this.controls = new OrbitControls(this.camera, this.renderer.domElement);
    this.controls.enableDamping = true;
    const animate = () => {
      requestAnimationFrame(animate);
      this.controls.update();
      this.renderer.render(this.scene, this.camera);
    };
    animate();
  }

  showStl(buffer: ArrayBuffer): number {
    const parsed = parseBinaryStl(buffer);
    if (this.surface) {
      this.scene.remove(this.surface);
      this.surface.geometry.dispose();
    }
    const material = new MeshStandardMaterial({ color: 0xc9a36b, side: DoubleSide });
    this.surface = new Mesh(geometryFromStl(parsed), material);
    this.scene.add(this.surface);
    const center = meshCenter(parsed);
    const radius = Math.max(meshRadius(parsed, center), 1);
    this.controls.target.set(center[0], center[1], center[2]);
    this.camera.position.set(center[0], center[1] - 2.5 * radius, center[2] + 1.5 * radius);
    this.camera.near = radius / 100;
    this.camera.far = radius * 20;
    this.camera.updateProjectionMatrix();
    this.triangleCount = parsed.triangleCount;
    return parsed.triangleCount;
  }
}
