import init, { maskExplorer, Session } from "./pkg/phd_consistency_web.js";

const $ = (id) => document.getElementById(id);
const COLORS = { unit: "#1f77b4", synthesized: "#2ca02c", subunit: "#d62728", diff: "#555" };

function fail(el, e) {
  el.textContent = String(e);
  el.classList.add("error");
}

function ok(el, text) {
  el.textContent = text;
  el.classList.remove("error");
}

function clear(canvas) {
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  return ctx;
}

// Step plot of `ys` over bin centers `xs` inside the box (x0, y0, w, h).
function stepPlot(ctx, xs, ys, box, xr, ymax, color, fill) {
  const [x0, y0, w, h] = box;
  const sx = (x) => x0 + ((x - xr[0]) / (xr[1] - xr[0])) * w;
  const sy = (y) => y0 + h - (ymax > 0 ? (y / ymax) * h : 0);
  const half = xs.length > 1 ? (xs[1] - xs[0]) / 2 : 0.5;
  ctx.beginPath();
  ctx.moveTo(sx(xs[0] - half), sy(0));
  for (let i = 0; i < xs.length; i++) {
    ctx.lineTo(sx(xs[i] - half), sy(ys[i]));
    ctx.lineTo(sx(xs[i] + half), sy(ys[i]));
  }
  ctx.lineTo(sx(xs[xs.length - 1] + half), sy(0));
  if (fill) {
    ctx.fillStyle = fill;
    ctx.fill();
  }
  ctx.strokeStyle = color;
  ctx.stroke();
  return { sx, sy };
}

function drawMask() {
  const spacing = +$("m-spacing").value;
  const sigma = +$("m-sigma").value;
  const dx = +$("m-dx").value;
  $("m-spacing-v").textContent = spacing.toFixed(1);
  $("m-sigma-v").textContent = sigma.toFixed(2);
  const canvas = $("mask-canvas");
  const ctx = clear(canvas);
  let m;
  try {
    m = JSON.parse(maskExplorer(spacing, sigma, dx));
  } catch (e) {
    return fail($("mask-readout"), e);
  }
  const xs = m.offsets;
  const ymax = Math.max(...m.mask) * 1.1;
  const xr = [xs[0] - dx, xs[xs.length - 1] + dx];
  const { sx } = stepPlot(ctx, xs, m.mask, [30, 10, canvas.width - 40, canvas.height - 40], xr, ymax, COLORS.synthesized, "#2ca02c33");
  ctx.fillStyle = "#000";
  for (const o of [-spacing, 0, spacing]) {
    ctx.fillRect(sx(o) - 1, canvas.height - 30, 2, 8);
    ctx.fillText(o.toFixed(1), sx(o) - 8, canvas.height - 10);
  }
  ok(
    $("mask-readout"),
    `${xs.length} bins, half-width ${xs[xs.length - 1].toFixed(2)} m, mask mass ${m.mask_mass.toFixed(8)}\n` +
      `response to a unit spike: mass ${m.dirac_mass.toFixed(8)}` +
      (sigma < dx / 2 ? "  (sigma below dx/2: point deposits)" : ""),
  );
}

let session = null;
let series = null;

function runSession() {
  const sigma = +$("e-sigma").value;
  const seed = Math.max(0, Math.floor(+$("e-seed").value));
  const steps = Math.floor(+$("e-steps").value);
  try {
    session?.free();
    session = new Session(sigma, seed, steps);
  } catch (e) {
    session = null;
    return fail($("frame-readout"), e);
  }
  series = JSON.parse(session.series());
  $("e-t").max = session.steps - 1;
  $("e-t").value = Math.min(+$("e-t").value, session.steps - 1);
  drawFrame();
}

function drawSeries(t) {
  const canvas = $("series-canvas");
  const ctx = clear(canvas);
  const recs = series.records;
  const box = [40, 10, canvas.width - 50, canvas.height - 30];
  const ymax = 6.3;
  const sx = (i) => box[0] + (i / Math.max(1, recs.length - 1)) * box[2];
  const sy = (y) => box[1] + box[3] - (y / ymax) * box[3];
  ctx.strokeStyle = "#ddd";
  ctx.fillStyle = "#777";
  for (const y of [0, 2, 4, 6]) {
    ctx.beginPath();
    ctx.moveTo(box[0], sy(y));
    ctx.lineTo(box[0] + box[2], sy(y));
    ctx.stroke();
    ctx.fillText(String(y), 20, sy(y) + 4);
  }
  for (const [key, color] of [["d_1", "#000"], ["d_2", "#1f77b4"], ["d_inf", "#ff7f0e"]]) {
    ctx.beginPath();
    recs.forEach((r, i) => (i ? ctx.lineTo(sx(i), sy(r[key])) : ctx.moveTo(sx(i), sy(r[key]))));
    ctx.strokeStyle = color;
    ctx.stroke();
    ctx.fillStyle = color;
    ctx.fillText(key, box[0] + box[2] - 40, sy(6) + 12 * ["d_1", "d_2", "d_inf"].indexOf(key) + 10);
  }
  ctx.strokeStyle = "#d62728";
  ctx.beginPath();
  ctx.moveTo(sx(t), box[1]);
  ctx.lineTo(sx(t), box[1] + box[3]);
  ctx.stroke();
}

function drawFrame() {
  if (!session) return;
  const t = +$("e-t").value;
  $("e-t-v").textContent = String(t);
  const f = JSON.parse(session.frame(t));
  const { x_min, dx, n_bins } = series;
  const xs = Array.from({ length: n_bins }, (_, i) => x_min + (i + 0.5) * dx);
  const centre = f.truth_unit;
  const half = Math.max(25, 3 * +$("e-sigma").value + 15);
  const xr = [centre - half, centre + half];
  const lo = Math.max(0, Math.floor((xr[0] - x_min) / dx));
  const hi = Math.min(n_bins, Math.ceil((xr[1] - x_min) / dx));
  const cut = (a) => a.slice(lo, hi);
  const diff = f.subunit.map((v, i) => Math.abs(v - f.synthesized[i]));
  const panels = [
    ["D_U", f.unit, COLORS.unit],
    ["D*_SU", f.synthesized, COLORS.synthesized],
    ["D_SU", f.subunit, COLORS.subunit],
    ["|D_SU - D*_SU|", diff, COLORS.diff],
  ];
  const canvas = $("frame-canvas");
  const ctx = clear(canvas);
  const ph = canvas.height / panels.length;
  const ymax = Math.max(0.5, ...cut(f.unit), ...cut(f.subunit), ...cut(f.synthesized)) * 1.05;
  let sx = null;
  panels.forEach(([name, ys, color], k) => {
    const box = [40, k * ph + 6, canvas.width - 50, ph - 16];
    sx = stepPlot(ctx, cut(xs), cut(ys), box, xr, ymax, color, color + "33").sx;
    ctx.fillStyle = "#000";
    ctx.fillText(name, 44, k * ph + 18);
    ctx.fillStyle = "#0008";
    const marks = k === 0 ? [f.truth_unit] : k < 3 ? f.truth_subunits : [];
    for (const m of marks) ctx.fillRect(sx(m) - 1, box[1] + box[3] - 6, 2, 6);
  });
  ctx.fillStyle = "#777";
  for (let x = Math.ceil(xr[0] / 10) * 10; x <= xr[1]; x += 10) ctx.fillText(String(x), sx(x) - 8, canvas.height - 1);

  const r = f.record;
  ok(
    $("frame-readout"),
    `t=${t}  mass U ${r.mass_u.toFixed(3)}  SU ${r.mass_su.toFixed(3)}  SU* ${r.mass_su_star.toFixed(3)}  ` +
      `d1 ${r.d_1.toFixed(3)}  d2 ${r.d_2.toFixed(3)}  dinf ${r.d_inf.toFixed(3)}`,
  );
  drawSeries(t);
  drawRegions(ctx, t, sx, ph);
}

function drawRegions(ctx, t, sx, ph) {
  const out = $("loc-readout");
  let regions;
  try {
    regions = JSON.parse(session.localize(t, $("l-norm").value, +$("l-threshold").value, +$("l-width").value));
  } catch (e) {
    return fail(out, e);
  }
  if ($("l-on").checked) {
    ctx.fillStyle = "#ff7f0e44";
    for (const r of regions) ctx.fillRect(sx(r.a), 3 * ph, Math.max(2, sx(r.b) - sx(r.a)), ph);
  }
  ok(
    out,
    regions.length
      ? regions.map((r) => `[${r.a.toFixed(2)}, ${r.b.toFixed(2)})  local distance ${r.local_distance.toFixed(3)}  depth ${r.depth}`).join("\n")
      : "no region above threshold",
  );
}

await init();
for (const id of ["m-spacing", "m-sigma", "m-dx"]) $(id).addEventListener("input", drawMask);
for (const b of document.querySelectorAll("button[data-sigma]")) {
  b.addEventListener("click", () => {
    $("e-sigma").value = b.dataset.sigma;
    runSession();
  });
}
$("e-run").addEventListener("click", runSession);
$("e-t").addEventListener("input", drawFrame);
for (const id of ["l-norm", "l-threshold", "l-width", "l-on"]) $(id).addEventListener("input", drawFrame);
drawMask();
runSession();
