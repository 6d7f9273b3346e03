import init, { synthPreview, simulate, route } from "./pkg/infraloom_web.js";

const EXAMPLE = `@DynamoDBTable("id", ReadWrite)
object Storage {
    val table = DynamoTable("id")
}

@Get("/")
fun root(): String {
    return "Hello world!"
}

@Get("/ids/{key}")
fun lookup(key: String, limit: Int): String {
    return Storage.table.get(key)
}

@Post("/ids/{key}")
fun store(key: String, value: String) {
    Storage.table.put(key, value)
}

@StaticGet("/css/site.css", MimeType.CSS)
val css = File("css/site.css")
`;

const $ = (id) => document.getElementById(id);
let preview = null;
let tab = "hcl";

function showOutput() {
  if (!preview) return;
  const text = { hcl: preview.hcl, policy: preview.policy || "(no statements)", schema: JSON.stringify(preview.schema, null, 2) }[tab];
  $("output").textContent = text;
  $("hcl-lines").textContent = `${preview.hclLines} lines of HCL`;
}

function runSynth() {
  try {
    preview = JSON.parse(synthPreview($("source").value, $("app-name").value, $("warming").checked));
    $("synth-error").textContent = "";
    showOutput();
  } catch (e) {
    $("synth-error").textContent = e.message ?? String(e);
  }
}

function runRoute() {
  try {
    const r = JSON.parse(route($("source").value, $("method").value, $("target").value));
    $("route-result").textContent = JSON.stringify(r, null, 2);
  } catch (e) {
    $("route-result").textContent = e.message ?? String(e);
  }
}

function drawChart(series) {
  const canvas = $("chart");
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = { l: 44, r: 44, t: 10, b: 22 };
  ctx.clearRect(0, 0, w, h);
  if (series.length === 0) return;

  const maxT = series[series.length - 1].second + 1;
  const maxReq = Math.max(1, ...series.map((b) => b.requests));
  const maxLat = Math.max(1, ...series.map((b) => b.p99LatencyMs));
  const x = (s) => pad.l + (s / maxT) * (w - pad.l - pad.r);
  const yL = (v) => h - pad.b - (v / maxReq) * (h - pad.t - pad.b);
  const yR = (v) => h - pad.b - (v / maxLat) * (h - pad.t - pad.b);

  ctx.strokeStyle = "#c9cfd9";
  ctx.fillStyle = "#5a6475";
  ctx.font = "11px system-ui";
  ctx.beginPath();
  ctx.moveTo(pad.l, pad.t);
  ctx.lineTo(pad.l, h - pad.b);
  ctx.lineTo(w - pad.r, h - pad.b);
  ctx.lineTo(w - pad.r, pad.t);
  ctx.stroke();
  ctx.fillText(String(maxReq), 4, pad.t + 10);
  ctx.fillText(`${Math.round(maxLat)}`, w - pad.r + 4, pad.t + 10);
  ctx.fillText("0", pad.l - 12, h - pad.b);
  ctx.fillText(`${maxT}s`, w - pad.r - 20, h - 6);

  const line = (color, pick, y) => {
    ctx.strokeStyle = color;
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    series.forEach((b, i) => (i ? ctx.lineTo : ctx.moveTo).call(ctx, x(b.second + 0.5), y(pick(b))));
    ctx.stroke();
  };
  line("#3f6fd8", (b) => b.requests, yL);
  line("#e0662f", (b) => b.cold, yL);
  line("#2f9e6a", (b) => b.p99LatencyMs, yR);
}

function runSimulation() {
  const num = (id) => Number($(id).value);
  const request = {
    rps: num("rps"),
    durationSeconds: num("duration"),
    maxInstances: num("max-instances"),
    serviceTimeMs: num("service"),
    coldStartMs: num("cold"),
    warming: $("sim-warming").checked,
    periodMinutes: num("period"),
  };
  try {
    const { metrics, series } = JSON.parse(simulate(JSON.stringify(request)));
    $("sim-error").textContent = "";
    drawChart(series);
    const fmt = (v) => (typeof v === "number" && !Number.isInteger(v) ? v.toFixed(3) : v);
    $("metrics").innerHTML = Object.entries(metrics)
      .map(([k, v]) => `<tr><td>${k}</td><td>${fmt(v)}</td></tr>`)
      .join("");
  } catch (e) {
    $("sim-error").textContent = e.message ?? String(e);
  }
}

await init();
$("source").value = EXAMPLE;
$("synth").addEventListener("click", runSynth);
$("route").addEventListener("click", runRoute);
$("simulate").addEventListener("click", runSimulation);
$("target").addEventListener("keydown", (e) => e.key === "Enter" && runRoute());
document.querySelectorAll(".tabs button").forEach((b) =>
  b.addEventListener("click", () => {
    document.querySelectorAll(".tabs button").forEach((o) => o.classList.toggle("active", o === b));
    tab = b.dataset.tab;
    showOutput();
  }),
);
runSynth();
runRoute();
runSimulation();
