import { StrokeDocument } from "./document.js";

export interface GenerateSuccess {
  kind: "ok";
  png: Uint8Array;
  fingerprint: string;
  inferenceMs: number;
}

export interface GenerateFailure {
  kind: "error";
  code: string;
}

export type GenerateResult = GenerateSuccess | GenerateFailure;

/** Minimal fetch shape so tests can stub the network without a browser. */
export interface FetchResponseLike {
  status: number;
  headers: { get(name: string): string | null };
  arrayBuffer(): Promise<ArrayBuffer>;
  json(): Promise<unknown>;
}

export type FetchLike = (
  url: string,
  init: { method: string; body: Uint8Array; headers: Record<string, string> },
) => Promise<FetchResponseLike>;

/** Turns the current sketch document into PNG bytes (canvas encode in the browser). */
export type SketchEncoder = (doc: StrokeDocument) => Promise<Uint8Array>;

/**
 * UI-facing request state. At most one generate request is in flight; a
 * monotonically increasing sequence number lets a response that was
 * superseded (document changed while the request ran) be dropped unseen.
 */
export class SessionState {
  doc: StrokeDocument;
  baseUrl: string;
  inFlight = false;
  lastImage: Uint8Array | null = null;
  lastFingerprint: string | null = null;
  lastError: string | null = null;
  private seq = 0;

  constructor(doc: StrokeDocument, baseUrl: string) {
    this.doc = doc;
    this.baseUrl = baseUrl.replace(/\/$/, "");
  }

  /** Call when the document changes so a pending response becomes stale. */
  invalidate(): void {
    this.seq += 1;
  }

  currentSeq(): number {
    return this.seq;
  }
}

/** Byte-equal to what submitSketch sends: both go through the same encoder. */
export async function exportSketch(
  session: SessionState,
  encode: SketchEncoder,
): Promise<Uint8Array> {
  return encode(session.doc);
}

/**
 * One explicit user action, one POST. Returns "suppressed" without touching
 * the network when a request is already in flight, and "stale" when the
 * document changed before the response arrived (the result is discarded).
 */
export async function submitSketch(
  session: SessionState,
  encode: SketchEncoder,
  fetchImpl: FetchLike,
): Promise<"ok" | "error" | "suppressed" | "stale"> {
  if (session.inFlight) {
    return "suppressed";
  }
  session.inFlight = true;
  const seq = session.currentSeq();
  try {
    const png = await encode(session.doc);
    const resp = await fetchImpl(`${session.baseUrl}/api/generate`, {
      method: "POST",
      body: png,
      headers: { "Content-Type": "image/png" },
    });
    const result = await readResult(resp);
    if (seq !== session.currentSeq()) {
      return "stale"; // a newer document superseded this request
    }
    if (result.kind === "ok") {
      session.lastImage = result.png;
      session.lastFingerprint = result.fingerprint;
      session.lastError = null;
      return "ok";
    }
    session.lastError = result.code;
    return "error";
  } catch {
    if (seq === session.currentSeq()) {
      session.lastError = "network_error";
    }
    return "error";
  } finally {
    session.inFlight = false;
  }
}

async function readResult(resp: FetchResponseLike): Promise<GenerateResult> {
  if (resp.status === 200) {
    return {
      kind: "ok",
      png: new Uint8Array(await resp.arrayBuffer()),
      fingerprint: resp.headers.get("X-Model-Fingerprint") ?? "",
      inferenceMs: Number(resp.headers.get("X-Inference-Ms") ?? "0"),
    };
  }
  const body = (await resp.json().catch(() => null)) as { code?: string } | null;
  return { kind: "error", code: body?.code ?? `http_${resp.status}` };
}
