/**
 * Voxel view: occupied cells from geometry frames drawn as cubes in an
 * orbitable 3D projection on a plain canvas (painter's algorithm — the
 * grids are small enough that a dependency-free renderer is plenty).
 *
 * Index order matches the server: flat index = x*n*n + y*n + z.
 * All the geometry math is pure and unit-testable without a DOM.
 */

export interface Cell {
  x: number;
  y: number;
  z: number;
}

/** Flat index → cell coordinates, or null if out of range / non-integer. */
export function indexToCell(index: number, n: number): Cell | null {
  if (!Number.isInteger(index) || index < 0 || index >= n * n * n) return null;
  const x = Math.floor(index / (n * n));
  const y = Math.floor(index / n) % n;
  const z = index % n;
  return { x, y, z };
}

/** Decode a whole geometry frame; null if any index is invalid. */
export function cellsFromOccupied(occupied: number[], n: number): Cell[] | null {
  const cells: Cell[] = [];
  for (const i of occupied) {
    const c = indexToCell(i, n);
    if (c === null) return null;
    cells.push(c);
  }
  return cells;
}

export interface ProjectedCell {
  /** Screen position in [-1, 1]-ish view units, before canvas scaling. */
  sx: number;
  sy: number;
  /** View-space depth used for painter's sorting (larger = nearer). */
  depth: number;
  /** Shade factor in (0, 1] from depth, for simple lighting. */
  shade: number;
}

/**
 * Orthographic projection of cell centers after yaw (about +z) and pitch
 * (about the screen x axis), centered on the grid. Returned sorted far → near.
 */
export function projectCells(cells: Cell[], n: number, yaw: number, pitch: number): ProjectedCell[] {
  const cy = Math.cos(yaw);
  const sy = Math.sin(yaw);
  const cp = Math.cos(pitch);
  const sp = Math.sin(pitch);
  const half = (n - 1) / 2;
  const scale = 1 / n;
  const out: ProjectedCell[] = [];
  for (const c of cells) {
    const x = c.x - half;
    const y = c.y - half;
    const z = c.z - half;
    const rx = cy * x - sy * y;
    const ry = sy * x + cy * y;
    const vy = cp * ry - sp * z;
    const vz = sp * ry + cp * z;
    const depth = vy;
    out.push({
      sx: rx * scale,
      sy: -vz * scale,
      depth,
      shade: 0.45 + 0.55 * (0.5 + (depth * scale) / 2),
    });
  }
  out.sort((a, b) => a.depth - b.depth);
  return out;
}

/** Canvas renderer with pointer-drag orbiting; re-renders only when told to. */
export class VoxelView {
  private canvas: HTMLCanvasElement;
  private cells: Cell[] = [];
  private n = 24;
  yaw = Math.PI / 5;
  pitch = Math.PI / 7;

  constructor(canvas: HTMLCanvasElement) {
    this.canvas = canvas;
    let dragging = false;
    let lastX = 0;
    let lastY = 0;
    canvas.addEventListener("pointerdown", (ev) => {
      dragging = true;
      lastX = ev.clientX;
      lastY = ev.clientY;
      canvas.setPointerCapture(ev.pointerId);
    });
    canvas.addEventListener("pointermove", (ev) => {
      if (!dragging) return;
      this.yaw += (ev.clientX - lastX) * 0.01;
      this.pitch += (ev.clientY - lastY) * 0.01;
      this.pitch = Math.max(-Math.PI / 2, Math.min(Math.PI / 2, this.pitch));
      lastX = ev.clientX;
      lastY = ev.clientY;
      this.draw();
    });
    canvas.addEventListener("pointerup", () => {
      dragging = false;
    });
  }

  /** Accept a geometry frame; returns false (and keeps state) if invalid. */
  setGeometry(occupied: number[], n: number): boolean {
    const cells = cellsFromOccupied(occupied, n);
    if (cells === null) return false;
    this.cells = cells;
    this.n = n;
    this.draw();
    return true;
  }

  draw(): void {
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    const w = this.canvas.width;
    const h = this.canvas.height;
    ctx.clearRect(0, 0, w, h);
    const size = Math.min(w, h) * 0.85;
    const px = (s: number) => w / 2 + s * size;
    const py = (s: number) => h / 2 + s * size;
    this.drawAxes(ctx, px, py);
    const cellPx = Math.max(2, (size / this.n) * 0.95);
    for (const p of projectCells(this.cells, this.n, this.yaw, this.pitch)) {
      const g = Math.round(150 * p.shade);
      ctx.fillStyle = `rgb(${g}, ${Math.round(190 * p.shade)}, ${Math.round(255 * p.shade)})`;
      ctx.fillRect(px(p.sx) - cellPx / 2, py(p.sy) - cellPx / 2, cellPx, cellPx);
    }
  }

  private drawAxes(ctx: CanvasRenderingContext2D, px: (s: number) => number, py: (s: number) => number): void {
    const ends: Cell[] = [
      { x: this.n, y: 0, z: 0 },
      { x: 0, y: this.n, z: 0 },
      { x: 0, y: 0, z: this.n },
    ];
    const origin = projectCells([{ x: 0, y: 0, z: 0 }], this.n, this.yaw, this.pitch)[0];
    const colors = ["#c0504d", "#6aa84f", "#3d85c6"];
    ends.forEach((end, i) => {
      const p = projectCells([end], this.n, this.yaw, this.pitch)[0];
      ctx.strokeStyle = colors[i];
      ctx.lineWidth = 1;
      ctx.beginPath();
      ctx.moveTo(px(origin.sx), py(origin.sy));
      ctx.lineTo(px(p.sx), py(p.sy));
      ctx.stroke();
    });
  }
}
