import init, { sample_box, plaquette_curves, sprinkle_box } from "./pkg/fklab_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function hue(c) {
  return `hsl(${(c * 137.508) % 360}, 65%, 45%)`;
}

function drawBox(canvas, pic) {
  const ctx = canvas.getContext("2d");
  const w = canvas.width;
  const scale = w / (2 * pic.n + 2);
  const at = (v) => (v + pic.n + 1) * scale;
  ctx.clearRect(0, 0, w, canvas.height);
  ctx.lineWidth = Math.max(1, scale / 4);
  for (const [x1, y1, x2, y2, c] of pic.edges) {
    ctx.strokeStyle = hue(c);
    ctx.beginPath();
    ctx.moveTo(at(x1), at(-y1));
    ctx.lineTo(at(x2), at(-y2));
    ctx.stroke();
  }
  ctx.strokeStyle = "#000";
  ctx.setLineDash([scale / 4, scale / 4]);
  for (const [x1, y1, x2, y2] of pic.sprinkled) {
    ctx.beginPath();
    ctx.moveTo(at(x1), at(-y1));
    ctx.lineTo(at(x2), at(-y2));
    ctx.stroke();
  }
  ctx.setLineDash([]);
}

function call(fn, out) {
  const res = JSON.parse(fn());
  if (res.error) {
    $(out).textContent = "error: " + res.error;
    return null;
  }
  return res;
}

function sample() {
  const pic = call(
    () => sample_box(num("s-n"), num("s-p"), num("s-q"), $("s-wired").checked, num("s-sweeps"), BigInt(num("s-seed"))),
    "s-out",
  );
  if (!pic) return;
  drawBox($("s-canvas"), pic);
  $("s-out").textContent = `clusters ${pic.clusters}, open edge density ${pic.density.toFixed(3)}`;
}

function curves() {
  const res = JSON.parse(plaquette_curves(num("c-q"), 100));
  const canvas = $("c-canvas");
  const ctx = canvas.getContext("2d");
  const [w, h] = [canvas.width, canvas.height];
  ctx.clearRect(0, 0, w, h);
  if (res.error) return;
  const colors = ["#999", "#1f77b4", "#d62728", "#2ca02c"];
  for (const col of [0, 1, 2, 3]) {
    ctx.strokeStyle = colors[col];
    ctx.beginPath();
    res.rows.forEach((r, i) => {
      const x = r[0] * w;
      const y = h - r[col] * h;
      if (i === 0) ctx.moveTo(x, y);
      else ctx.lineTo(x, y);
    });
    ctx.stroke();
  }
}

function sprinkle() {
  const pic = call(() => sprinkle_box(num("k-n"), num("k-p"), num("k-eps"), 50, BigInt(num("k-seed"))), "k-out");
  if (!pic) return;
  drawBox($("k-canvas"), pic);
  const u = pic.u_sequence.length ? pic.u_sequence.join(", ") : "n/a";
  $("k-out").textContent = `Unique: ${pic.unique ?? "n/a"}   U_i: ${u}   dashed: sprinkled edges`;
}

await init();
$("s-go").onclick = sample;
$("c-go").onclick = curves;
$("k-go").onclick = sprinkle;
sample();
curves();
