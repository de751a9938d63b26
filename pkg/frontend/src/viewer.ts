/** Canvas point-cloud renderer: perspective projection of score-colored
 * screen-space splats, sized by camera distance, with orbit/zoom controls. */

import { scoreColorCss } from "./colormap.js";

export interface Camera {
  yaw: number; // radians around +y
  pitch: number; // radians around the camera's x axis
  distance: number; // camera distance from the origin
}

export interface Projected {
  x: number;
  y: number;
  depth: number; // distance from the camera along the view axis
  radius: number; // splat radius in pixels
}

export const FOCAL = 1.2; // focal length in units of half the viewport
export const BASE_SPLAT = 4.0; // splat radius at depth == 1

/** Orbit rotation: yaw about +y, then pitch about the camera x axis. */
export function rotatePoint(
  yaw: number,
  pitch: number,
  p: [number, number, number],
): [number, number, number] {
  const cy = Math.cos(yaw);
  const sy = Math.sin(yaw);
  const x1 = cy * p[0] + sy * p[2];
  const z1 = -sy * p[0] + cy * p[2];
  const cp = Math.cos(pitch);
  const sp = Math.sin(pitch);
  const y2 = cp * p[1] - sp * z1;
  const z2 = sp * p[1] + cp * z1;
  return [x1, y2, z2];
}

/** Project one world point; null when it falls behind the camera. */
export function projectPoint(
  cam: Camera,
  p: [number, number, number],
  width: number,
  height: number,
): Projected | null {
  const r = rotatePoint(cam.yaw, cam.pitch, p);
  const depth = cam.distance - r[2];
  if (depth <= 1e-6) return null;
  const half = Math.min(width, height) / 2;
  return {
    x: width / 2 + (FOCAL * r[0] * half) / depth,
    y: height / 2 - (FOCAL * r[1] * half) / depth,
    depth,
    radius: BASE_SPLAT / depth,
  };
}

export class CloudViewer {
  camera: Camera = { yaw: 0.6, pitch: 0.4, distance: 3.0 };
  private points: [number, number, number][] = [];
  private scores: number[] = [];
  private dragging = false;
  private lastX = 0;
  private lastY = 0;

  constructor(private readonly canvas: HTMLCanvasElement) {
    canvas.addEventListener("pointerdown", (e) => {
      this.dragging = true;
      this.lastX = e.clientX;
      this.lastY = e.clientY;
      canvas.setPointerCapture?.(e.pointerId);
    });
    canvas.addEventListener("pointermove", (e) => {
      if (!this.dragging) return;
      this.orbit(e.clientX - this.lastX, e.clientY - this.lastY);
      this.lastX = e.clientX;
      this.lastY = e.clientY;
    });
    canvas.addEventListener("pointerup", () => {
      this.dragging = false;
    });
    canvas.addEventListener("wheel", (e) => {
      e.preventDefault();
      this.zoom(e.deltaY);
    });
  }

  setCloud(points: [number, number, number][], scores: number[]): void {
    this.points = points;
    this.scores = scores;
    this.render();
  }

  orbit(dx: number, dy: number): void {
    this.camera.yaw += dx * 0.01;
    this.camera.pitch = Math.min(
      Math.PI / 2 - 0.01,
      Math.max(-Math.PI / 2 + 0.01, this.camera.pitch + dy * 0.01),
    );
    this.render();
  }

  zoom(deltaY: number): void {
    this.camera.distance = Math.min(
      20,
      Math.max(1.2, this.camera.distance * Math.exp(deltaY * 0.001)),
    );
    this.render();
  }

  render(): void {
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    const { width, height } = this.canvas;
    ctx.fillStyle = "#10141c";
    ctx.fillRect(0, 0, width, height);
    // painter's order: far splats first so near ones occlude them
    const drawn = this.points
      .map((p, i) => ({ proj: projectPoint(this.camera, p, width, height), i }))
      .filter((d): d is { proj: Projected; i: number } => d.proj !== null)
      .sort((a, b) => b.proj.depth - a.proj.depth);
    for (const { proj, i } of drawn) {
      ctx.fillStyle = scoreColorCss(this.scores[i] ?? 0);
      ctx.beginPath();
      ctx.arc(proj.x, proj.y, Math.max(0.75, proj.radius), 0, 2 * Math.PI);
      ctx.fill();
    }
  }
}
