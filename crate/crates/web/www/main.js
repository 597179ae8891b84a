import init, { independence_field, minimality, witness_curves } from "./pkg/mlrank_web.js";

const $ = (id) => document.getElementById(id);

function call(fn, ...args) {
  const v = JSON.parse(fn(...args));
  if (v && v.error) throw new Error(v.error);
  return v;
}

function show(el, text, isError = false) {
  el.textContent = text;
  el.className = isError ? "out err" : "out";
}

// Joint distribution (p11, p12, p21, p22) to 3D via the vertices of a
// regular tetrahedron.
const VERTS = [[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]];
const bary = (w) => [0, 1, 2].map((k) => w.reduce((s, wi, i) => s + wi * VERTS[i][k], 0));

let view = { yaw: 0.6, pitch: 0.4 };
let field = [];

function project([x, y, z], canvas) {
  const cy = Math.cos(view.yaw), sy = Math.sin(view.yaw);
  const cp = Math.cos(view.pitch), sp = Math.sin(view.pitch);
  const x1 = cy * x + sy * z, z1 = -sy * x + cy * z;
  const y1 = cp * y - sp * z1;
  const s = Math.min(canvas.width, canvas.height) * 0.32;
  return [canvas.width / 2 + s * x1, canvas.height / 2 - s * y1];
}

function line(ctx, a, b) {
  ctx.beginPath();
  ctx.moveTo(a[0], a[1]);
  ctx.lineTo(b[0], b[1]);
  ctx.stroke();
}

function drawField() {
  const canvas = $("field");
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.strokeStyle = "#bbb";
  for (let i = 0; i < 4; i++)
    for (let j = i + 1; j < 4; j++) line(ctx, project(VERTS[i], canvas), project(VERTS[j], canvas));
  const scale = $("scale").value / 100;
  for (const f of field) {
    const a = project(bary(f.point), canvas);
    const tip = f.point.map((x, i) => x + scale * f.h[i]);
    ctx.fillStyle = "#000";
    ctx.fillRect(a[0] - 1.5, a[1] - 1.5, 3, 3);
    ctx.strokeStyle = "#1f5fbf";
    line(ctx, a, project(bary(tip), canvas));
  }
}

function loadField() {
  const g = Number($("grid").value);
  $("grid-val").textContent = g;
  try {
    field = call(independence_field, g);
    const norms = field.map((f) => f.h_norm);
    show($("field-out"), `${field.length} points, |H| from ${Math.min(...norms).toExponential(3)} to ${Math.max(...norms).toExponential(3)}`);
  } catch (e) {
    field = [];
    show($("field-out"), e.message, true);
  }
  drawField();
}

function runMinimality() {
  try {
    const r = call(minimality, $("shape").value, $("rank").value, Number($("samples").value), BigInt($("seed").value));
    const failed = r.ratios.filter((x) => x === null).length;
    show($("min-out"), `${r.pass ? "PASS" : "FAIL"}: manifold dimension ${r.dim}, max |H| / max |d2r| = ${r.max_ratio.toExponential(3)} over ${r.samples} samples` +
      (failed ? `, ${failed} samples failed` : ""));
  } catch (e) {
    show($("min-out"), e.message, true);
  }
}

function drawProbe() {
  const canvas = $("probe");
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  let r;
  try {
    r = call(witness_curves, $("p-shape").value, $("p-values").value, $("p-span").value / 100);
  } catch (e) {
    show($("probe-out"), e.message, true);
    return;
  }
  const all = r.gamma.concat(r.twin);
  const ymax = Math.max(1e-12, ...all.map(Math.abs));
  const umax = r.u[r.u.length - 1];
  const px = (u) => canvas.width * (0.5 + 0.45 * u / umax);
  const py = (v) => canvas.height * (0.5 - 0.45 * v / ymax);
  ctx.strokeStyle = "#ccc";
  line(ctx, [0, py(0)], [canvas.width, py(0)]);
  line(ctx, [px(0), 0], [px(0), canvas.height]);
  for (const [ys, color] of [[r.gamma, "#1f5fbf"], [r.twin, "#c0392b"]]) {
    ctx.strokeStyle = color;
    ctx.beginPath();
    ys.forEach((y, i) => (i ? ctx.lineTo(px(r.u[i]), py(y)) : ctx.moveTo(px(r.u[i]), py(y))));
    ctx.stroke();
  }
  show($("probe-out"), `level ${r.level}, coefficient ${r.coefficient}, derivatives at 0: [${r.pairings.join(", ")}]\n` +
    `witness parameters u+ = ${r.u_plus}, u- = ${r.u_minus}`);
}

await init();

let drag = null;
$("field").addEventListener("pointerdown", (e) => (drag = [e.clientX, e.clientY]));
window.addEventListener("pointerup", () => (drag = null));
window.addEventListener("pointermove", (e) => {
  if (!drag) return;
  view.yaw += (e.clientX - drag[0]) * 0.01;
  view.pitch += (e.clientY - drag[1]) * 0.01;
  drag = [e.clientX, e.clientY];
  drawField();
});
$("grid").addEventListener("input", loadField);
$("scale").addEventListener("input", drawField);
$("run").addEventListener("click", runMinimality);
for (const id of ["p-shape", "p-values", "p-span"]) $(id).addEventListener("input", drawProbe);

loadField();
drawProbe();
