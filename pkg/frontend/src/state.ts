// Panel state and its reducer. The panel is a pure view plus input source:
// widget state is a fold over the messages received, so replaying the same
// stream always rebuilds the same state.

import type { DriverKind, ServerMessage, TraceMessage } from "./protocol.js";

export const WAVEFORM_WINDOW = 256;
const EVENT_LOG_LIMIT = 200;

/** Trace record kinds surfaced in the event log rather than on a widget. */
const LOGGED_KINDS = new Set([
  "preempt",
  "deadline_miss",
  "deadlock",
  "driver_overflow",
  "dropped_stimulus",
]);

export type ConnectionStatus = "connecting" | "connected" | "disconnected";

export interface Widget {
  id: number;
  kind: DriverKind;
  pressed: boolean; // buttons: reflects the last injected level
  on: boolean; // leds
  value: number; // last written word (dac, probe, uart)
  waveform: number[]; // rolling window of written words
}

export interface PanelState {
  status: ConnectionStatus;
  caseName: string | null;
  clockHz: number;
  virtualTime: number;
  widgets: Widget[];
  eventLog: string[];
}

export function initialState(): PanelState {
  return {
    status: "connecting",
    caseName: null,
    clockHz: 1_000_000,
    virtualTime: 0,
    widgets: [],
    eventLog: [],
  };
}

function freshWidget(id: number, kind: DriverKind): Widget {
  return { id, kind, pressed: false, on: false, value: 0, waveform: [] };
}

function applyWrite(widget: Widget, word: number): Widget {
  const next: Widget = { ...widget, value: word };
  if (widget.kind === "led") {
    next.on = word !== 0;
  }
  if (widget.kind === "dac" || widget.kind === "gpio_probe") {
    next.waveform = [...widget.waveform, word].slice(-WAVEFORM_WINDOW);
  }
  return next;
}

function describe(rec: TraceMessage): string {
  const parts = [`t=${rec.t}`, rec.kind];
  if (rec.pid !== undefined) parts.push(`pid=${rec.pid}`);
  if (rec.driver !== undefined) parts.push(`driver=${rec.driver}`);
  if (rec.data !== undefined) parts.push(`data=${rec.data}`);
  return parts.join(" ");
}

function applyTrace(state: PanelState, rec: TraceMessage): PanelState {
  const next: PanelState = { ...state, virtualTime: rec.t };
  if (rec.kind === "driver_write" && rec.driver !== undefined) {
    const widget = state.widgets[rec.driver];
    if (widget === undefined || rec.data === undefined) return state; // malformed: skip
    const widgets = state.widgets.slice();
    widgets[rec.driver] = applyWrite(widget, rec.data);
    next.widgets = widgets;
    return next;
  }
  if (rec.kind === "driver_msg" && rec.driver !== undefined) {
    const widget = state.widgets[rec.driver];
    if (widget !== undefined && widget.kind === "button" && rec.data !== undefined) {
      const widgets = state.widgets.slice();
      widgets[rec.driver] = { ...widget, pressed: rec.data !== 0 };
      next.widgets = widgets;
    }
    return next;
  }
  if (LOGGED_KINDS.has(rec.kind)) {
    next.eventLog = [...state.eventLog, describe(rec)].slice(-EVENT_LOG_LIMIT);
  }
  return next;
}

/** The reducer: fold one server message into the panel state. */
export function applyServerMessage(state: PanelState, msg: ServerMessage): PanelState {
  switch (msg.type) {
    case "board":
      return {
        ...state,
        status: "connected",
        caseName: msg.case ?? null,
        clockHz: msg.clock_hz,
        widgets: msg.drivers.map((d) => freshWidget(d.id, d.kind)),
      };
    case "snapshot": {
      // Rebuild from the server's fold of the trace to date.
      const widgets = state.widgets.map((w) => {
        const entry = msg.states.find((s) => s.driver === w.id);
        if (entry === undefined) return w;
        const rebuilt = freshWidget(w.id, w.kind);
        return applyWrite(rebuilt, entry.data);
      });
      return { ...state, virtualTime: msg.t, widgets };
    }
    case "trace":
      return applyTrace(state, msg);
  }
}

export function setStatus(state: PanelState, status: ConnectionStatus): PanelState {
  return { ...state, status };
}

/** Fold a whole stream; the panel invariant is that this is deterministic. */
export function foldMessages(messages: ServerMessage[], start?: PanelState): PanelState {
  let state = start ?? initialState();
  for (const msg of messages) {
    state = applyServerMessage(state, msg);
  }
  return state;
}
