export type Tool = "pen" | "eraser";

export interface Point {
  x: number;
  y: number;
}

export interface Stroke {
  points: Point[];
  width: number;
  tool: Tool;
}

export const DEFAULT_CANVAS_SIZE = 256;

/**
 * Ordered list of strokes with undo/redo. The document is the single source
 * of truth; the canvas is always re-rendered from it, so undo can never leave
 * phantom pixels behind.
 */
export class StrokeDocument {
  readonly size: number;
  private strokes: Stroke[] = [];
  private redoStack: Stroke[] = [];

  constructor(size: number = DEFAULT_CANVAS_SIZE) {
    if (!Number.isInteger(size) || size <= 0) {
      throw new Error(`canvas size must be a positive integer, got ${size}`);
    }
    this.size = size;
  }

  addStroke(stroke: Stroke): void {
    if (stroke.points.length === 0) {
      throw new Error("stroke needs at least one point");
    }
    if (!(stroke.width > 0)) {
      throw new Error(`stroke width must be positive, got ${stroke.width}`);
    }
    // deep-copy so later mutation of the caller's array cannot corrupt history
    this.strokes.push({
      points: stroke.points.map((p) => ({ x: p.x, y: p.y })),
      width: stroke.width,
      tool: stroke.tool,
    });
    this.redoStack = [];
  }

  undo(): boolean {
    const stroke = this.strokes.pop();
    if (!stroke) return false;
    this.redoStack.push(stroke);
    return true;
  }

  redo(): boolean {
    const stroke = this.redoStack.pop();
    if (!stroke) return false;
    this.strokes.push(stroke);
    return true;
  }

  clear(): void {
    this.strokes = [];
    this.redoStack = [];
  }

  getStrokes(): readonly Stroke[] {
    return this.strokes;
  }

  get strokeCount(): number {
    return this.strokes.length;
  }
}
