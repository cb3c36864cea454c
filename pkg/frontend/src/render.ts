import { StrokeDocument } from "./document.js";

/** The subset of CanvasRenderingContext2D the renderer needs; tests inject a fake. */
export interface DrawContext {
  fillStyle: string;
  strokeStyle: string;
  lineWidth: number;
  lineCap: string;
  lineJoin: string;
  fillRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  fill(): void;
  stroke(): void;
}

export const BACKGROUND = "#ffffff";
export const INK = "#1a1a1a";

/**
 * Deterministic full repaint: white background, then every stroke in document
 * order. Eraser strokes paint background color over the ink.
 */
export function renderDocument(doc: StrokeDocument, ctx: DrawContext): void {
  ctx.fillStyle = BACKGROUND;
  ctx.fillRect(0, 0, doc.size, doc.size);
  for (const stroke of doc.getStrokes()) {
    const color = stroke.tool === "eraser" ? BACKGROUND : INK;
    if (stroke.points.length === 1) {
      // a click without drag still leaves a dot
      const p = stroke.points[0];
      ctx.fillStyle = color;
      ctx.beginPath();
      ctx.arc(p.x, p.y, stroke.width / 2, 0, Math.PI * 2);
      ctx.fill();
      continue;
    }
    ctx.strokeStyle = color;
    ctx.lineWidth = stroke.width;
    ctx.lineCap = "round";
    ctx.lineJoin = "round";
    ctx.beginPath();
    ctx.moveTo(stroke.points[0].x, stroke.points[0].y);
    for (const p of stroke.points.slice(1)) {
      ctx.lineTo(p.x, p.y);
    }
    ctx.stroke();
  }
}
