// Wire shapes of the gateway's HTTP/WS contract.

export interface LnValue {
  value: boolean | number | string;
  t: number;
}

export interface Snapshot {
  time_ns: number;
  disconnector: "open" | "closed";
  breaker_pos: string; // on | off | intermediate | bad
  load_a: number;
  fault_a: number;
  amp: number;
  shots: number;
  recloser_mode: string;
  locked_out: boolean;
  lns: Record<string, LnValue>;
}

export interface TraceRecord {
  t: number; // virtual nanoseconds
  kind: string; // event | change | goose_pub | goose_dlv | note | snapshot
  device: string;
  resource: string;
  fb: string;
  event: string;
  payload?: Record<string, unknown>;
}

export interface WsFrame {
  seq: number;
  record: TraceRecord;
}

export type CommandKind = "load" | "disconnector" | "fault";

// object references the fold watches
export const REF_POS = "BRKLD0/XCBR1.Pos.stVal";
export const REF_TR = "PROTLD0/PTRC1.Tr.general";
export const REF_REC_OP = "RECLD0/RREC1.Op.general";
export const REF_BLK = "RECLD0/RREC1.BlkRec.stVal";
export const REF_AMP = "CTLD0/TCTR1.Amp.mag";
