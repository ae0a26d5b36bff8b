// Panel session: one duplex connection, UI updates in message-arrival
// order, automatic retry while disconnected. Presses are the only way the
// panel touches the simulation, and every accepted press sends exactly one
// message.

import { parseServerMessage, pressMessage } from "./protocol.js";
import {
  applyServerMessage,
  initialState,
  PanelState,
  setStatus,
} from "./state.js";

/** The slice of the WebSocket surface the client needs (browser or ws).
 * Handler parameters are deliberately loose: DOM and ws event types differ,
 * and the client only ever reads `.data`. */
export interface PanelSocket {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: any) => void) | null;
  onmessage: ((ev: any) => void) | null;
  onclose: ((ev?: any) => void) | null;
  onerror: ((ev?: any) => void) | null;
}

export type SocketFactory = (url: string) => PanelSocket;

export interface ClientOptions {
  retryMs?: number;
  onChange?: (state: PanelState) => void;
  onSkip?: (raw: string) => void; // malformed frames, logged and dropped
}

export class PanelClient {
  state: PanelState = initialState();
  pressesSent = 0;

  private socket: PanelSocket | null = null;
  private url = "";
  private closed = false;
  private retryTimer: ReturnType<typeof setTimeout> | null = null;
  private readonly retryMs: number;
  private readonly onChange: (state: PanelState) => void;
  private readonly onSkip: (raw: string) => void;

  constructor(private makeSocket: SocketFactory, options: ClientOptions = {}) {
    this.retryMs = options.retryMs ?? 1000;
    this.onChange = options.onChange ?? (() => undefined);
    this.onSkip = options.onSkip ?? (() => undefined);
  }

  connect(host: string, port: number): void {
    this.url = `ws://${host}:${port}`;
    this.closed = false;
    this.open();
  }

  private open(): void {
    this.update(setStatus(this.state, "connecting"));
    const socket = this.makeSocket(this.url);
    this.socket = socket;
    socket.onopen = () => {
      // Connected state is confirmed by the board message; nothing to do.
    };
    socket.onmessage = (ev) => this.handleRaw(String(ev.data));
    socket.onclose = () => this.dropped();
    socket.onerror = () => {
      socket.onclose = null;
      this.dropped();
    };
  }

  private dropped(): void {
    this.socket = null;
    this.update(setStatus(this.state, "disconnected"));
    if (!this.closed && this.retryTimer === null) {
      this.retryTimer = setTimeout(() => {
        this.retryTimer = null;
        if (!this.closed) this.open();
      }, this.retryMs);
    }
  }

  private handleRaw(raw: string): void {
    const msg = parseServerMessage(raw);
    if (msg === null) {
      this.onSkip(raw);
      return;
    }
    this.update(applyServerMessage(this.state, msg));
  }

  /**
   * Press or release a button widget. Returns true when a stimulus message
   * was sent; non-button drivers and disconnected sessions send nothing.
   */
  press(driver: number, down: boolean): boolean {
    const widget = this.state.widgets[driver];
    if (widget === undefined || widget.kind !== "button") return false;
    if (this.socket === null || this.state.status !== "connected") return false;
    this.socket.send(pressMessage(driver, down));
    this.pressesSent += 1;
    return true;
  }

  disconnect(): void {
    this.closed = true;
    if (this.retryTimer !== null) {
      clearTimeout(this.retryTimer);
      this.retryTimer = null;
    }
    this.socket?.close();
    this.socket = null;
    this.update(setStatus(this.state, "disconnected"));
  }

  private update(state: PanelState): void {
    this.state = state;
    this.onChange(state);
  }
}
