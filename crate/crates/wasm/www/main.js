// Built with: wasm-bindgen --target web --out-dir www/pkg <lhc_wasm.wasm>
import init, { recoveryCurve, theoryCurve, peelTrace } from "./pkg/lhc_wasm.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

// Minimal line/bar plot: xs/ys arrays, axis ranges, optional bars.
function plot(canvas, xs, ys, { xmin, xmax, ymin, ymax, bars = false, xlabel = "", ylabel = "", hline = null }) {
  const ctx = canvas.getContext("2d");
  const W = canvas.width, H = canvas.height, L = 50, B = 30, T = 10, R = 10;
  const sx = (x) => L + ((x - xmin) / (xmax - xmin)) * (W - L - R);
  const sy = (y) => H - B - ((y - ymin) / (ymax - ymin)) * (H - B - T);
  ctx.clearRect(0, 0, W, H);
  ctx.strokeStyle = "#999";
  ctx.beginPath(); ctx.moveTo(L, T); ctx.lineTo(L, H - B); ctx.lineTo(W - R, H - B); ctx.stroke();
  ctx.fillStyle = "#444"; ctx.font = "11px sans-serif";
  ctx.fillText(xlabel, W / 2, H - 5);
  ctx.fillText(ylabel, 2, T + 10);
  ctx.fillText(String(ymax), 2, sy(ymax) + 10);
  ctx.fillText(String(ymin), 2, sy(ymin));
  ctx.fillText(String(xmin), L, H - B + 12);
  ctx.fillText(String(xmax), W - R - 30, H - B + 12);
  if (hline !== null) {
    ctx.strokeStyle = "#c33"; ctx.setLineDash([4, 4]);
    ctx.beginPath(); ctx.moveTo(L, sy(hline)); ctx.lineTo(W - R, sy(hline)); ctx.stroke();
    ctx.setLineDash([]);
  }
  ctx.strokeStyle = ctx.fillStyle = "#2a6fb0";
  if (bars) {
    const w = Math.max(2, (W - L - R) / xs.length - 4);
    xs.forEach((x, i) => ctx.fillRect(sx(x) - w / 2, sy(ys[i]), w, sy(ymin) - sy(ys[i])));
  } else {
    ctx.beginPath();
    xs.forEach((x, i) => (i ? ctx.lineTo(sx(x), sy(ys[i])) : ctx.moveTo(sx(x), sy(ys[i]))));
    ctx.stroke();
    xs.forEach((x, i) => ctx.fillRect(sx(x) - 2, sy(ys[i]) - 2, 4, 4));
  }
}

function guarded(statusId, f) {
  return () => {
    $(statusId).textContent = "running…";
    // Yield so the status paints before the synchronous call.
    setTimeout(() => {
      const t0 = performance.now();
      try {
        f();
        $(statusId).textContent += ` (${Math.round(performance.now() - t0)} ms)`;
      } catch (e) {
        $(statusId).textContent = `error: ${e.message ?? e}`;
      }
    }, 10);
  };
}

const FRACTIONS = [0.1, 0.3, 0.5, 0.6, 0.7, 0.75, 0.8, 0.82, 0.84, 0.86, 0.88, 0.9, 0.95, 1.0, 1.2, 1.5];

function runCurve() {
  const rates = recoveryCurve(num("rc-n"), num("rc-s"), num("rc-c"), Float64Array.from(FRACTIONS), num("rc-seeds"));
  plot($("rc-plot"), FRACTIONS, Array.from(rates), {
    xmin: 0, xmax: 1.5, ymin: 0, ymax: 1, xlabel: "sketch cells / N", ylabel: "recovery rate",
  });
  const full = FRACTIONS.find((f, i) => rates[i] === 1);
  $("rc-status").textContent = full ? `full recovery from ${full}` : "no full recovery on this grid";
}

function runTheory() {
  const lambdas = Array.from({ length: 31 }, (_, i) => 10 ** (i / 10));
  const flat = theoryCurve(num("th-n"), num("th-b"), num("th-g"), Float64Array.from(lambdas));
  const ratios = lambdas.map((_, i) => flat[2 * i + 1]);
  plot($("th-plot"), lambdas.map(Math.log10), ratios, {
    xmin: 0, xmax: 3, ymin: 1, ymax: 2, xlabel: "log10 zeros per non-zero", ylabel: "size / bound", hline: 1.6,
  });
  $("th-status").textContent = `worst ratio ${Math.max(...ratios).toFixed(3)}`;
}

function runTrace() {
  const trace = Array.from(peelTrace(num("pt-n"), num("pt-s"), 64, num("pt-f"), num("pt-seed")));
  const left = trace.pop();
  const rounds = trace.map((_, i) => i + 1);
  plot($("pt-plot"), rounds, trace, {
    xmin: 0, xmax: rounds.length + 1, ymin: 0, ymax: Math.max(1, ...trace), bars: true,
    xlabel: "round", ylabel: "resolved",
  });
  $("pt-status").textContent = `${rounds.length} rounds, ${left} unresolved`;
}

await init();
$("rc-go").onclick = guarded("rc-status", runCurve);
$("th-go").onclick = guarded("th-status", runTheory);
$("pt-go").onclick = guarded("pt-status", runTrace);
