// Canvas rendering of one line with pixel-aligned overlays.

import { clampZoom, cutRect, scaleBox } from "./overlay";
import type { Corrections, LineDetail } from "./types";

const CUT_FILL: Record<string, string> = {
  plain_gap: "rgba(70, 160, 255, 0.18)",
  bridged_gap: "rgba(255, 170, 40, 0.25)",
};

export class LineView {
  zoom = 3;
  private image: HTMLImageElement | null = null;

  constructor(private canvas: HTMLCanvasElement) {}

  async setLine(detail: LineDetail): Promise<void> {
    this.image = await loadImage(`data:image/png;base64,${detail.image_png_base64}`);
  }

  setZoom(zoom: number): void {
    this.zoom = clampZoom(zoom);
  }

  render(detail: LineDetail, working: Corrections, saved: Corrections): void {
    if (!this.image) return;
    const z = this.zoom;
    this.canvas.width = detail.width * z;
    this.canvas.height = detail.height * z;
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    ctx.imageSmoothingEnabled = false;
    ctx.clearRect(0, 0, this.canvas.width, this.canvas.height);
    ctx.drawImage(this.image, 0, 0, this.canvas.width, this.canvas.height);

    for (const cut of detail.cuts) {
      const [x0, y0, x1, y1] = cutRect(cut, detail.height, z);
      ctx.fillStyle = CUT_FILL[cut.kind] ?? CUT_FILL.plain_gap;
      ctx.fillRect(x0, y0, x1 - x0, y1 - y0);
    }

    ctx.font = `${10 + 2 * z}px monospace`;
    for (const occ of detail.occurrences) {
      const [x0, y0, x1, y1] = scaleBox(occ.box, z);
      ctx.strokeStyle = "#18794e";
      ctx.lineWidth = 1;
      ctx.strokeRect(x0 + 0.5, y0 + 0.5, x1 - x0 - 1, y1 - y0 - 1);
      if (occ.class_id !== null) {
        ctx.fillStyle = "#18794e";
        ctx.fillText(`t${occ.class_id}`, x0 + 2, Math.max(10, y0 - 2));
      }
    }

    const savedForced = new Set(saved.forced_cuts);
    for (const col of working.forced_cuts) {
      this.vline(ctx, col * z, detail.height * z, savedForced.has(col) ? "#c2302f" : "#e07b39", !savedForced.has(col));
    }
    const savedForbidden = new Set(saved.forbidden_cuts);
    for (const leftIndex of working.forbidden_cuts) {
      const left = detail.occurrences.find((o) => o.index === leftIndex);
      const right = detail.occurrences.find((o) => o.index === leftIndex + 1);
      if (!left || !right) continue;
      const x0 = left.box[2] * z;
      const x1 = right.box[0] * z;
      ctx.strokeStyle = savedForbidden.has(leftIndex) ? "#7a3db8" : "#b07be0";
      ctx.setLineDash(savedForbidden.has(leftIndex) ? [] : [4, 3]);
      ctx.lineWidth = 2;
      const midY = (detail.height * z) / 2;
      ctx.beginPath();
      ctx.moveTo(x0, midY);
      ctx.lineTo(x1, midY);
      ctx.stroke();
      ctx.setLineDash([]);
    }
  }

  private vline(ctx: CanvasRenderingContext2D, x: number, height: number, color: string, dashed: boolean): void {
    ctx.strokeStyle = color;
    ctx.lineWidth = Math.max(1, this.zoom / 2);
    ctx.setLineDash(dashed ? [5, 3] : []);
    ctx.beginPath();
    ctx.moveTo(x + 0.5, 0);
    ctx.lineTo(x + 0.5, height);
    ctx.stroke();
    ctx.setLineDash([]);
  }
}

function loadImage(src: string): Promise<HTMLImageElement> {
  return new Promise((resolve, reject) => {
    const img = new Image();
    img.onload = () => resolve(img);
    img.onerror = () => reject(new Error("line image failed to decode"));
    img.src = src;
  });
}
