// Built with `wasm-pack build crates/wasm-demo --target web --out-dir www/pkg`.
import init, { convolve_magnitude, estimate, product_bound } from "./pkg/grpd_wasm_demo.js";

const canvas = document.getElementById("view");
const ctx = canvas.getContext("2d");
const status = document.getElementById("status");
const val = (id) => document.getElementById(id).value;

function drawGrid(mag, n) {
  let top = 0;
  for (const v of mag) top = Math.max(top, v);
  const img = ctx.createImageData(n, n);
  for (let i = 0; i < n * n; i++) {
    // log scale over six decades
    const t = top > 0 && mag[i] > 0 ? Math.max(0, 1 + Math.log10(mag[i] / top) / 6) : 0;
    const g = 255 - Math.round(255 * t);
    img.data.set([g, g, g, 255], 4 * i);
  }
  const tmp = new OffscreenCanvas(n, n);
  tmp.getContext("2d").putImageData(img, 0, 0);
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(tmp, 0, 0, canvas.width, canvas.height);
}

function clear() {
  ctx.fillStyle = "#fff";
  ctx.fillRect(0, 0, canvas.width, canvas.height);
}

// Cells carry base boxes in [0,1) circle coordinates and arcs in radians.
function drawCones(cones, color, len) {
  const s = canvas.width;
  ctx.strokeStyle = color;
  ctx.lineWidth = 1.5;
  for (const cell of cones.cells) {
    const mid = (b) => (b[1] >= b[0] ? (b[0] + b[1]) / 2 : ((b[0] + b[1] + 1) / 2) % 1);
    const row = mid(cell.base_box[0]) * s;
    const col = mid(cell.base_box[1]) * s;
    for (const [lo, hi0] of cell.arcs) {
      const hi = hi0 < lo ? hi0 + 2 * Math.PI : hi0;
      const steps = Math.max(1, Math.ceil((hi - lo) / 0.15));
      for (let k = 0; k <= steps; k++) {
        const a = lo + ((hi - lo) * k) / steps;
        // covector (ξ, η): ξ pairs with rows, η with columns
        ctx.beginPath();
        ctx.moveTo(col, row);
        ctx.lineTo(col + len * Math.sin(a), row + len * Math.cos(a));
        ctx.stroke();
      }
    }
  }
}

function run(label, f) {
  status.textContent = `${label}…`;
  setTimeout(() => {
    const t = performance.now();
    try {
      const msg = f();
      status.textContent = `${label}: ${msg} (${(performance.now() - t).toFixed(0)} ms)`;
    } catch (e) {
      status.textContent = `${label} failed: ${e}`;
    }
  }, 0);
}

document.getElementById("convolve").onclick = () =>
  run("convolve", () => {
    const n = Number(val("n"));
    drawGrid(convolve_magnitude(val("lhs"), val("rhs"), n), n);
    return "|u1 * u2| on a log scale";
  });

document.getElementById("estimate").onclick = () =>
  run("estimate", () => {
    const n = Number(val("n"));
    const cones = JSON.parse(estimate(val("lhs"), n));
    drawGrid(convolve_magnitude("delta", val("lhs"), n), n);
    drawCones(cones, "#e4572e", 18);
    return `${cones.cells.length} singular cells`;
  });

document.getElementById("bound").onclick = () =>
  run("product bound", () => {
    const n = Number(val("n"));
    const r = JSON.parse(product_bound(val("lhs"), val("rhs"), n));
    if (r.product_max === 0) clear();
    else drawGrid(convolve_magnitude(val("lhs"), val("rhs"), n), n);
    drawCones(r.predicted, "#3c91e6", 26);
    drawCones(r.estimated, "#e4572e", 16);
    return `${r.pass ? "contained" : "NOT contained"}; ${r.estimated.cells.length} estimated, ${r.predicted.cells.length} predicted cells`;
  });

init().then(() => {
  status.textContent = "ready";
});
