// Wire protocol: newline-delimited JSON over a websocket.
// Server to client: board, snapshot, trace. Client to server: press.
// Field names are fixed by the simulator; keep them bit-exact.

export type DriverKind = "led" | "button" | "dac" | "gpio_probe" | "uart_stub";

export interface BoardMessage {
  type: "board";
  case?: string;
  clock_hz: number;
  drivers: { id: number; kind: DriverKind }[];
}

export interface TraceMessage {
  type: "trace";
  t: number;
  kind: string;
  pid?: number;
  channel?: number;
  driver?: number;
  data?: number;
}

export interface SnapshotMessage {
  type: "snapshot";
  t: number;
  states: { driver: number; kind?: DriverKind; data: number }[];
}

export type ServerMessage = BoardMessage | TraceMessage | SnapshotMessage;

export interface PressMessage {
  type: "press";
  driver: number;
  data: number;
}

const DRIVER_KINDS = new Set(["led", "button", "dac", "gpio_probe", "uart_stub"]);

/** Parse one incoming frame; null for anything malformed. */
export function parseServerMessage(raw: string): ServerMessage | null {
  let msg: unknown;
  try {
    msg = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof msg !== "object" || msg === null) return null;
  const m = msg as Record<string, unknown>;
  switch (m.type) {
    case "board": {
      if (typeof m.clock_hz !== "number" || !Array.isArray(m.drivers)) return null;
      for (const d of m.drivers as unknown[]) {
        const drv = d as Record<string, unknown>;
        if (typeof drv.id !== "number" || !DRIVER_KINDS.has(String(drv.kind))) {
          return null;
        }
      }
      return m as unknown as BoardMessage;
    }
    case "trace": {
      if (typeof m.t !== "number" || typeof m.kind !== "string") return null;
      return m as unknown as TraceMessage;
    }
    case "snapshot": {
      if (typeof m.t !== "number" || !Array.isArray(m.states)) return null;
      return m as unknown as SnapshotMessage;
    }
    default:
      return null;
  }
}

/** Serialize a press; the field order matches the protocol examples. */
export function pressMessage(driver: number, down: boolean): string {
  return JSON.stringify({ type: "press", driver, data: down ? 1 : 0 });
}
