// Browser entry point: connect to the simulator's serve port and render.

import { PanelClient } from "./client.js";
import { render } from "./panel.js";

const params = new URLSearchParams(window.location.search);
const host = params.get("host") ?? "127.0.0.1";
const port = Number(params.get("port") ?? "8765");

const root = document.getElementById("panel");
if (root === null) {
  throw new Error("missing #panel element");
}

const client = new PanelClient((url) => new WebSocket(url), {
  onChange: (state) => render(state, root, (driver, down) => client.press(driver, down)),
  onSkip: (raw) => console.warn("skipped malformed record", raw),
});
client.connect(host, port);
