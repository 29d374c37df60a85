// Server-authoritative world state: a pure fold over (initial snapshot,
// ordered event frames).  Replaying a recorded stream from the same
// snapshot reproduces the identical state object — the UI never renders
// anything it merely hopes happened.

import {
  REF_AMP,
  REF_BLK,
  REF_POS,
  REF_REC_OP,
  REF_TR,
  Snapshot,
  TraceRecord,
  WsFrame,
} from "./types.js";

export const LOG_LIMIT = 500;

export interface LogEntry {
  seq: number;
  timeMs: number;
  kind: string; // trip | reclose | lockout | position | measurement | goose | shots | info
  text: string;
}

export interface WorldState {
  breakerPos: string;
  disconnector: "open" | "closed";
  loadA: number;
  faultA: number;
  amp: number;
  shots: number;
  recloserMode: string;
  lockedOut: boolean;
  trip: boolean;
  log: LogEntry[]; // newest first, bounded to LOG_LIMIT
  lastSeq: number | null;
  gapDetected: boolean;
}

export function initialState(snapshot: Snapshot): WorldState {
  return {
    breakerPos: snapshot.breaker_pos,
    disconnector: snapshot.disconnector,
    loadA: snapshot.load_a,
    faultA: snapshot.fault_a,
    amp: snapshot.amp,
    shots: snapshot.shots,
    recloserMode: snapshot.recloser_mode,
    lockedOut: snapshot.locked_out,
    trip: false,
    log: [],
    lastSeq: null,
    gapDetected: false,
  };
}

/** Later snapshots refresh the setpoints the event stream does not carry. */
export function foldSnapshot(state: WorldState, snapshot: Snapshot): WorldState {
  return {
    ...state,
    disconnector: snapshot.disconnector,
    loadA: snapshot.load_a,
    faultA: snapshot.fault_a,
  };
}

function push(state: WorldState, entry: LogEntry): LogEntry[] {
  const log = [entry, ...state.log];
  return log.length > LOG_LIMIT ? log.slice(0, LOG_LIMIT) : log;
}

function changeValue(rec: TraceRecord): boolean | number | string {
  const payload = rec.payload as { new: { value: boolean | number | string } };
  return payload.new.value;
}

export function foldEvent(state: WorldState, frame: WsFrame): WorldState {
  const rec = frame.record;
  const timeMs = Math.floor(rec.t / 1_000_000);
  let next: WorldState = { ...state, lastSeq: frame.seq };
  if (state.lastSeq !== null && frame.seq !== state.lastSeq + 1) {
    next.gapDetected = true;
    next.log = push(next, {
      seq: frame.seq,
      timeMs,
      kind: "info",
      text: `sequence gap: ${state.lastSeq} -> ${frame.seq}`,
    });
  }

  if (rec.kind === "change") {
    const ref = (rec.payload as { ref?: string }).ref ?? "";
    const value = changeValue(rec);
    if (ref === REF_POS) {
      next.breakerPos = String(value);
      next.log = push(next, {
        seq: frame.seq, timeMs, kind: "position", text: `breaker ${value}`,
      });
    } else if (ref === REF_TR) {
      next.trip = value === true;
      if (value === true) {
        next.log = push(next, { seq: frame.seq, timeMs, kind: "trip", text: "trip issued" });
      }
    } else if (ref === REF_REC_OP && value === true) {
      next.log = push(next, { seq: frame.seq, timeMs, kind: "reclose", text: "reclose command" });
    } else if (ref === REF_BLK) {
      next.lockedOut = value === true;
      next.log = push(next, {
        seq: frame.seq, timeMs, kind: "lockout",
        text: value === true ? "recloser locked out" : "recloser unblocked",
      });
      if (value !== true) {
        next.shots = 0;
        next.recloserMode = "idle";
      } else {
        next.recloserMode = "locked_out";
      }
    } else if (ref === REF_AMP) {
      next.amp = Number(value);
      next.log = push(next, {
        seq: frame.seq, timeMs, kind: "measurement", text: `feeder ${value} A`,
      });
    }
  } else if (rec.kind === "note" && rec.event === "shots") {
    const payload = rec.payload as { count: number; mode: string };
    next.shots = payload.count;
    next.recloserMode = payload.mode;
    next.log = push(next, {
      seq: frame.seq, timeMs, kind: "shots",
      text: `shot counter ${payload.count} (${payload.mode})`,
    });
  } else if (rec.kind === "goose_pub") {
    const payload = rec.payload as { app_id: number; st_num: number; sq_num: number };
    if (payload.sq_num === 0) {
      // state changes only; retransmissions would flood the log
      next.log = push(next, {
        seq: frame.seq, timeMs, kind: "goose",
        text: `${rec.event} st=${payload.st_num} (app 0x${payload.app_id.toString(16)})`,
      });
    }
  }
  return next;
}

export function foldStream(snapshot: Snapshot, frames: Iterable<WsFrame>): WorldState {
  let state = initialState(snapshot);
  for (const frame of frames) {
    state = foldEvent(state, frame);
  }
  return state;
}
