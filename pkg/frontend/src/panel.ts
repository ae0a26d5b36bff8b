// DOM rendering of the panel state: buttons you can hold down, LED dots,
// DAC level with a waveform strip, the virtual clock and an event log.

import type { PanelState, Widget } from "./state.js";

export type PressHandler = (driver: number, down: boolean) => void;

function button(widget: Widget, onPress: PressHandler): HTMLElement {
  const el = document.createElement("button");
  el.className = "widget button" + (widget.pressed ? " pressed" : "");
  el.textContent = `BTN ${widget.id}`;
  el.onmousedown = () => onPress(widget.id, true);
  el.onmouseup = () => onPress(widget.id, false);
  el.onmouseleave = () => {
    if (widget.pressed) onPress(widget.id, false);
  };
  return el;
}

function led(widget: Widget): HTMLElement {
  const el = document.createElement("div");
  el.className = "widget led" + (widget.on ? " on" : "");
  el.textContent = `LED ${widget.id} ${widget.on ? "●" : "○"}`;
  return el;
}

function waveform(widget: Widget): string {
  const peak = Math.max(1, ...widget.waveform);
  const glyphs = " ▁▂▃▄▅▆▇█";
  return widget.waveform
    .slice(-64)
    .map((v) => glyphs[Math.min(8, Math.round((v / peak) * 8))])
    .join("");
}

function meter(widget: Widget): HTMLElement {
  const el = document.createElement("div");
  el.className = `widget ${widget.kind}`;
  const label = widget.kind === "dac" ? "DAC" : widget.kind.toUpperCase();
  el.textContent = `${label} ${widget.id} = ${widget.value}`;
  const strip = document.createElement("pre");
  strip.className = "waveform";
  strip.textContent = waveform(widget);
  el.appendChild(strip);
  return el;
}

export function render(state: PanelState, root: HTMLElement, onPress: PressHandler): void {
  root.replaceChildren();

  const header = document.createElement("div");
  header.className = `header ${state.status}`;
  const seconds = state.virtualTime / state.clockHz;
  header.textContent =
    state.status === "connected"
      ? `${state.caseName ?? "board"} | t = ${state.virtualTime} ticks (${seconds.toFixed(3)} s)`
      : `${state.status}... retrying`;
  root.appendChild(header);

  const widgets = document.createElement("div");
  widgets.className = "widgets";
  for (const widget of state.widgets) {
    if (widget.kind === "button") widgets.appendChild(button(widget, onPress));
    else if (widget.kind === "led") widgets.appendChild(led(widget));
    else widgets.appendChild(meter(widget));
  }
  root.appendChild(widgets);

  const log = document.createElement("ul");
  log.className = "eventlog";
  for (const line of state.eventLog.slice(-12)) {
    const item = document.createElement("li");
    if (line.includes("deadline_miss") || line.includes("deadlock")) {
      item.className = "alert";
    }
    item.textContent = line;
    log.appendChild(item);
  }
  root.appendChild(log);
}
