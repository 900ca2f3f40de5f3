/**
 * The WebSocket JSON protocol spoken by the `neurovoxel run` server.
 *
 * Every incoming message is validated here; anything malformed is rejected
 * (the caller logs and keeps its last good state).
 */

export const CLASS_NAMES = ["cube", "pyramid", "torus", "union"] as const;

export interface PosteriorMsg {
  type: "posterior";
  seq: number;
  probs: number[];
  smoothed: number[];
  paused: boolean;
}

export interface GeometryMsg {
  type: "geometry";
  occupied: number[];
  grid_n: number;
}

export interface StatusMsg {
  type: "status";
  [key: string]: unknown;
}

export interface AckMsg {
  type: "ack";
  cmd: string;
  ok: boolean;
  result: string | null;
  error: string | null;
}

export type ServerMsg = PosteriorMsg | GeometryMsg | StatusMsg | AckMsg;

export type ControlCmd = "pause" | "resume" | "save" | "imagine";

export interface ControlMsg {
  type: "control";
  cmd: ControlCmd;
  class_id?: number;
}

function isDistribution(v: unknown): v is number[] {
  if (!Array.isArray(v) || v.length === 0) return false;
  let sum = 0;
  for (const p of v) {
    if (typeof p !== "number" || !Number.isFinite(p) || p < 0 || p > 1) return false;
    sum += p;
  }
  return Math.abs(sum - 1) <= 1e-5;
}

/** Parse one raw frame; returns null (never throws) on anything malformed. */
export function parseServerMsg(raw: string): ServerMsg | null {
  let doc: unknown;
  try {
    doc = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof doc !== "object" || doc === null) return null;
  const m = doc as Record<string, unknown>;
  switch (m.type) {
    case "posterior":
      if (
        typeof m.seq === "number" &&
        Number.isInteger(m.seq) &&
        m.seq >= 0 &&
        isDistribution(m.probs) &&
        isDistribution(m.smoothed) &&
        typeof m.paused === "boolean"
      ) {
        return m as unknown as PosteriorMsg;
      }
      return null;
    case "geometry": {
      const n = m.grid_n;
      if (typeof n !== "number" || !Number.isInteger(n) || n < 2) return null;
      if (!Array.isArray(m.occupied)) return null;
      for (const i of m.occupied) {
        if (typeof i !== "number" || !Number.isInteger(i) || i < 0 || i >= n * n * n) return null;
      }
      return m as unknown as GeometryMsg;
    }
    case "status":
      return m as StatusMsg;
    case "ack":
      if (typeof m.cmd === "string" && typeof m.ok === "boolean") {
        return {
          type: "ack",
          cmd: m.cmd,
          ok: m.ok,
          result: typeof m.result === "string" ? m.result : null,
          error: typeof m.error === "string" ? m.error : null,
        };
      }
      return null;
    default:
      return null;
  }
}

export function encodeControl(cmd: ControlCmd, classId?: number): string {
  const msg: ControlMsg = { type: "control", cmd };
  if (cmd === "imagine") msg.class_id = classId;
  return JSON.stringify(msg);
}
