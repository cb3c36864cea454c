import { DEFAULT_CANVAS_SIZE, Stroke, StrokeDocument, Tool } from "./document.js";
import { DrawContext, renderDocument } from "./render.js";
import { SessionState, SketchEncoder, submitSketch, exportSketch } from "./session.js";

const SERVER_URL =
  new URLSearchParams(window.location.search).get("server") ?? "http://127.0.0.1:8000";

function pngBlob(bytes: Uint8Array): Blob {
  // copy into a plain ArrayBuffer so Blob accepts it under strict lib typings
  return new Blob([new Uint8Array(bytes).buffer as ArrayBuffer], { type: "image/png" });
}

function canvasEncoder(canvas: HTMLCanvasElement): SketchEncoder {
  return (doc: StrokeDocument) =>
    new Promise<Uint8Array>((resolve, reject) => {
      renderDocument(doc, canvas.getContext("2d") as unknown as DrawContext);
      canvas.toBlob((blob) => {
        if (!blob) return reject(new Error("canvas encode failed"));
        blob.arrayBuffer().then((buf) => resolve(new Uint8Array(buf)), reject);
      }, "image/png");
    });
}

window.addEventListener("DOMContentLoaded", () => {
  const canvas = document.getElementById("sketch") as HTMLCanvasElement;
  canvas.width = DEFAULT_CANVAS_SIZE;
  canvas.height = DEFAULT_CANVAS_SIZE;
  const result = document.getElementById("result") as HTMLImageElement;
  const banner = document.getElementById("banner") as HTMLDivElement;
  const ctx = canvas.getContext("2d") as unknown as DrawContext;

  const doc = new StrokeDocument(DEFAULT_CANVAS_SIZE);
  const session = new SessionState(doc, SERVER_URL);
  const encode = canvasEncoder(canvas);

  let tool: Tool = "pen";
  let current: Stroke | null = null;

  const repaint = () => renderDocument(doc, ctx);
  repaint();

  const toCanvasPoint = (ev: PointerEvent) => {
    const rect = canvas.getBoundingClientRect();
    return {
      x: ((ev.clientX - rect.left) / rect.width) * canvas.width,
      y: ((ev.clientY - rect.top) / rect.height) * canvas.height,
    };
  };

  canvas.addEventListener("pointerdown", (ev) => {
    current = { points: [toCanvasPoint(ev)], width: tool === "eraser" ? 12 : 3, tool };
    canvas.setPointerCapture(ev.pointerId);
  });
  canvas.addEventListener("pointermove", (ev) => {
    if (!current) return;
    current.points.push(toCanvasPoint(ev));
    renderLive(ctx, current);
  });
  canvas.addEventListener("pointerup", () => {
    if (!current) return;
    doc.addStroke(current);
    session.invalidate();
    current = null;
    repaint();
  });

  const renderLive = (c: DrawContext, stroke: Stroke) => {
    const scratch = new StrokeDocument(doc.size);
    for (const s of doc.getStrokes()) scratch.addStroke(s);
    scratch.addStroke(stroke);
    renderDocument(scratch, c);
  };

  const bind = (id: string, fn: () => void) =>
    (document.getElementById(id) as HTMLButtonElement).addEventListener("click", fn);

  bind("pen", () => (tool = "pen"));
  bind("eraser", () => (tool = "eraser"));
  bind("undo", () => {
    if (doc.undo()) {
      session.invalidate();
      repaint();
    }
  });
  bind("redo", () => {
    if (doc.redo()) {
      session.invalidate();
      repaint();
    }
  });
  bind("clear", () => {
    doc.clear();
    session.invalidate();
    repaint();
  });
  bind("generate", async () => {
    banner.textContent = "";
    const outcome = await submitSketch(session, encode, (url, init) =>
      fetch(url, init as RequestInit),
    );
    if (outcome === "ok" && session.lastImage) {
      result.src = URL.createObjectURL(pngBlob(session.lastImage));
    } else if (outcome === "error") {
      banner.textContent = `error: ${session.lastError}`;
    }
  });
  bind("export", async () => {
    const png = await exportSketch(session, encode);
    const a = document.createElement("a");
    a.href = URL.createObjectURL(pngBlob(png));
    a.download = "sketch.png";
    a.click();
  });
});
