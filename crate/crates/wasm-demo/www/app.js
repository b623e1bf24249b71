import init, { analyze_point, tradeoff_curve, sample_path } from "./pkg/aoswake_wasm.js";

const POLICIES = ["n-policy", "single-sleep", "multi-sleep"];
const COLORS = { "n-policy": "#1f77b4", "single-sleep": "#d62728", "multi-sleep": "#2ca02c" };
const PHASE_COLORS = { busy: "#f4c7c3", idle: "#fff2cc", "idle-post-wake": "#fce8b2", sleep: "#cfe2f3", "wake-up": "#d9ead3" };
const SWEEPS = {
  lambda: [0.1, 100, 40, true],
  d: [0.1, 10, 30, true],
  theta: [0.1, 10, 30, true],
  s: [0.1, 10, 30, true],
  n: [1, 10, 10, false],
};

const $ = (id) => document.getElementById(id);

function sliderValue(el) {
  return el.dataset.linear !== undefined ? Number(el.value) : Math.pow(10, Number(el.value));
}

function params() {
  const p = {};
  for (const el of document.querySelectorAll("#params input")) {
    p[el.id] = el.type === "range" ? sliderValue(el) : Number(el.value);
    if (el.type === "range") el.nextElementSibling.textContent = p[el.id].toPrecision(3);
  }
  p.n = Math.round(p.n);
  return JSON.stringify(p);
}

function renderPoint(json) {
  const rows = POLICIES.map((pol) => JSON.parse(analyze_point(pol, json)));
  const fmt = (x) => x.toFixed(5);
  let html = "<tr><th>policy</th><th>avg AoS</th><th>avg power</th><th>busy</th><th>idle</th><th>sleep</th><th>wake-up</th></tr>";
  for (const r of rows) {
    const ph = Object.fromEntries(r.phases);
    html += `<tr><td style="text-align:left">${r.policy}</td><td>${fmt(r.avg_aos)}</td><td>${fmt(r.avg_power)}</td>` +
      `<td>${fmt(ph.busy)}</td><td>${fmt(ph.idle)}</td><td>${fmt(ph.sleep)}</td><td>${fmt(ph["wake-up"])}</td></tr>`;
  }
  $("point").innerHTML = html;
}

function axes(ctx, w, h, pad, xr, yr, xlabel, ylabel) {
  ctx.strokeStyle = "#888";
  ctx.fillStyle = "#444";
  ctx.font = "12px system-ui";
  ctx.beginPath();
  ctx.moveTo(pad, pad / 2);
  ctx.lineTo(pad, h - pad);
  ctx.lineTo(w - pad / 2, h - pad);
  ctx.stroke();
  for (let i = 0; i <= 4; i++) {
    const x = xr[0] + ((xr[1] - xr[0]) * i) / 4;
    const y = yr[0] + ((yr[1] - yr[0]) * i) / 4;
    ctx.fillText(x.toPrecision(3), pad + ((w - 1.5 * pad) * i) / 4 - 10, h - pad + 16);
    ctx.fillText(y.toPrecision(3), 4, h - pad - ((h - 1.5 * pad) * i) / 4 + 4);
  }
  ctx.fillText(xlabel, w / 2 - 40, h - 6);
  ctx.save();
  ctx.translate(12, h / 2 + 30);
  ctx.rotate(-Math.PI / 2);
  ctx.fillText(ylabel, 0, 0);
  ctx.restore();
}

function renderCurve(json) {
  const param = $("sweep").value;
  const [min, max, count, log] = SWEEPS[param];
  const pts = JSON.parse(tradeoff_curve(POLICIES.join(","), param, min, max, count, log, json));
  const canvas = $("curve");
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 50;
  ctx.clearRect(0, 0, w, h);
  const xs = pts.map((p) => p.avg_power);
  const ys = pts.map((p) => p.avg_aos);
  const xr = [Math.min(...xs), Math.max(...xs)];
  const yr = [0, Math.max(...ys) * 1.05];
  if (xr[1] - xr[0] < 1e-9) { xr[0] -= 0.05; xr[1] += 0.05; }
  const sx = (x) => pad + ((x - xr[0]) / (xr[1] - xr[0])) * (w - 1.5 * pad);
  const sy = (y) => h - pad - ((y - yr[0]) / (yr[1] - yr[0])) * (h - 1.5 * pad);
  axes(ctx, w, h, pad, xr, yr, "average energy E[P]", "average AoS");
  for (const pol of POLICIES) {
    const series = pts.filter((p) => p.policy === pol);
    if (!series.length) continue;
    ctx.strokeStyle = COLORS[pol];
    ctx.fillStyle = COLORS[pol];
    ctx.beginPath();
    series.forEach((p, i) => (i ? ctx.lineTo(sx(p.avg_power), sy(p.avg_aos)) : ctx.moveTo(sx(p.avg_power), sy(p.avg_aos))));
    ctx.stroke();
    for (const p of series) ctx.fillRect(sx(p.avg_power) - 2, sy(p.avg_aos) - 2, 4, 4);
  }
  $("legend").innerHTML = POLICIES.map((p) => `<span style="color:${COLORS[p]}">&#9632; ${p}</span>`).join("");
}

function renderPath(json) {
  const horizon = Number($("path-horizon").value) || 30;
  const seed = Number($("path-seed").value) || 0;
  const recs = JSON.parse(sample_path($("path-policy").value, json, horizon, seed, 20000));
  const canvas = $("path");
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 40;
  ctx.clearRect(0, 0, w, h);
  const ymax = Math.max(1e-9, ...recs.map((r) => r.aos)) * 1.1;
  const sx = (t) => pad + (t / horizon) * (w - 1.5 * pad);
  const sy = (a) => h - pad - (a / ymax) * (h - 1.5 * pad);
  for (let i = 0; i + 1 < recs.length; i++) {
    ctx.fillStyle = PHASE_COLORS[recs[i].phase] || "#eee";
    ctx.fillRect(sx(recs[i].time), pad / 2, sx(recs[i + 1].time) - sx(recs[i].time), h - 1.5 * pad);
  }
  axes(ctx, w, h, pad, [0, horizon], [0, ymax], "time", "AoS");
  ctx.strokeStyle = "#000";
  ctx.beginPath();
  recs.forEach((r, i) => (i ? ctx.lineTo(sx(r.time), sy(r.aos)) : ctx.moveTo(sx(r.time), sy(r.aos))));
  ctx.stroke();
}

function refresh() {
  try {
    const json = params();
    renderPoint(json);
    renderCurve(json);
    renderPath(json);
    $("error").textContent = "";
  } catch (e) {
    $("error").textContent = String(e);
  }
}

await init();
for (const el of document.querySelectorAll("input, select")) el.addEventListener("input", refresh);
refresh();
