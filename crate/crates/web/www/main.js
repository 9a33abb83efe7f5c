import init, { greenProfile, noiseSlice, densityDemo } from "./pkg/spde_density_web.js";

const num = (id) => Number(document.getElementById(id).value);

function plot(canvas, xs, series, band) {
  const ctx = canvas.getContext("2d");
  const w = canvas.width, h = canvas.height, pad = 30;
  ctx.clearRect(0, 0, w, h);
  const all = series.flatMap((s) => Array.from(s.ys));
  const lo = Math.min(0, ...all), hi = Math.max(...all);
  const x0 = xs[0], x1 = xs[xs.length - 1];
  const px = (x) => pad + ((x - x0) / (x1 - x0)) * (w - 2 * pad);
  const py = (y) => h - pad - ((y - lo) / (hi - lo || 1)) * (h - 2 * pad);
  if (band) {
    ctx.fillStyle = "#f2f2f2";
    ctx.fillRect(px(band[0]), pad, px(band[1]) - px(band[0]), h - 2 * pad);
  }
  ctx.strokeStyle = "#bbb";
  ctx.beginPath();
  ctx.moveTo(pad, py(0));
  ctx.lineTo(w - pad, py(0));
  ctx.stroke();
  for (const s of series) {
    ctx.strokeStyle = s.color;
    ctx.setLineDash(s.dash || []);
    ctx.beginPath();
    s.ys.forEach((y, i) => (i ? ctx.lineTo(px(xs[i]), py(y)) : ctx.moveTo(px(xs[i]), py(y))));
    ctx.stroke();
  }
  ctx.setLineDash([]);
  ctx.fillStyle = "#444";
  ctx.fillText(x0.toPrecision(3), pad, h - 10);
  ctx.fillText(x1.toPrecision(3), w - pad - 30, h - 10);
  ctx.fillText(hi.toPrecision(3), 2, pad);
}

function heatKernel() {
  const n = 400;
  const ys = greenProfile(num("g-t"), num("g-x"), n);
  const xs = Array.from({ length: n + 1 }, (_, i) => i / n);
  plot(document.getElementById("g-plot"), xs, [{ ys, color: "#1f77b4" }]);
}

function noise() {
  const n = num("n-n"), half = 2;
  const ys = noiseSlice(num("n-eps"), n, half, num("n-seed"));
  const xs = Array.from({ length: n }, (_, i) => -half + (2 * half * i) / n);
  plot(document.getElementById("n-plot"), xs, [{ ys, color: "#2ca02c" }]);
}

function density() {
  const status = document.getElementById("d-status");
  status.textContent = "running...";
  setTimeout(() => {
    try {
      const t0 = performance.now();
      const d = densityDemo(num("d-a"), num("d-s"), num("d-amp"), num("d-n"), num("d-seed"));
      const secs = ((performance.now() - t0) / 1000).toFixed(1);
      plot(
        document.getElementById("d-plot"),
        d.z(),
        [
          { ys: d.lower(), color: "#888", dash: [4, 3] },
          { ys: d.upper(), color: "#888", dash: [4, 3] },
          { ys: d.rho_kde(), color: "#ff7f0e" },
          { ys: d.rho_nv(), color: "#1f77b4" },
        ],
        [d.window_lo(), d.window_hi()],
      );
      status.textContent =
        `g in [${d.g_lo().toPrecision(4)}, ${d.g_hi().toPrecision(4)}] on the central 90% window; ` +
        `KDE ${d.pass() ? "inside" : "outside"} the envelopes (${secs} s)`;
      d.free();
    } catch (e) {
      status.textContent = `error: ${e.message ?? e}`;
    }
  }, 10);
}

await init();
document.getElementById("g-run").onclick = heatKernel;
document.getElementById("n-run").onclick = noise;
document.getElementById("d-run").onclick = density;
heatKernel();
noise();
