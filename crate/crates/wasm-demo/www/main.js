import init, { nearestKps, powerCurve, sizeSimulation } from "./pkg/kps_wasm.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function show(id, fn) {
  const out = $(id);
  out.classList.remove("error");
  try {
    return fn(out);
  } catch (e) {
    out.classList.add("error");
    out.textContent = String(e.message ?? e);
  }
}

function fmt(rows) {
  return rows.map((r) => r.map((x) => x.toFixed(6).padStart(12)).join(" ")).join("\n");
}

$("nkp-run").onclick = () =>
  show("nkp-out", (out) => {
    const entries = $("nkp-matrix").value.trim().split(/[\s,]+/).map(Number);
    const r = JSON.parse(nearestKps(new Float64Array(entries), num("nkp-p"), num("nkp-k")));
    out.textContent =
      `DS          ${r.ds.toExponential(6)}\n` +
      `relative DS ${r.relative_ds.toExponential(6)}\n\nG1\n${fmt(r.g1)}\n\nG2\n${fmt(r.g2)}\n\n` +
      `singular values ${r.singular_values.map((s) => s.toExponential(4)).join(" ")}\n` +
      r.warnings.map((w) => `warning: ${w}`).join("\n");
  });

function plot(points) {
  const c = $("pow-plot");
  const g = c.getContext("2d");
  g.clearRect(0, 0, c.width, c.height);
  const pad = 30;
  const maxS = Math.max(...points.map((p) => p.sigma), 1);
  const x = (s) => pad + (s / maxS) * (c.width - 2 * pad);
  const y = (v) => c.height - pad - v * (c.height - 2 * pad);
  g.strokeStyle = "#999";
  g.strokeRect(pad, pad, c.width - 2 * pad, c.height - 2 * pad);
  g.strokeStyle = "#c33";
  g.beginPath();
  points.forEach((p, i) => (i ? g.lineTo(x(p.sigma), y(p.asymptotic)) : g.moveTo(x(p.sigma), y(p.asymptotic))));
  g.stroke();
  g.fillStyle = "#236";
  for (const p of points) {
    if (p.simulated !== null) g.fillRect(x(p.sigma) - 3, y(p.simulated) - 3, 6, 6);
  }
}

$("pow-run").onclick = () =>
  show("pow-out", (out) => {
    const max = num("pow-max");
    const sigmas = Array.from({ length: 17 }, (_, i) => (max * i) / 16);
    const pts = JSON.parse(powerCurve(num("pow-n"), new Float64Array(sigmas), 0.05, num("pow-reps"), num("pow-seed")));
    plot(pts);
    out.textContent =
      "sigma   simulated  limiting\n" +
      pts
        .map((p) => `${p.sigma.toFixed(2).padStart(5)}   ${p.simulated === null ? "    -    " : p.simulated.toFixed(3).padStart(9)}  ${p.asymptotic.toFixed(3)}`)
        .join("\n");
  });

$("size-run").onclick = () =>
  show("size-out", (out) => {
    const rows = JSON.parse(
      sizeSimulation(num("size-p"), num("size-k"), num("size-n"), $("size-hetero").checked,
        new Float64Array([0.1, 0.05, 0.01]), num("size-reps"), 1),
    );
    out.textContent =
      `p=${rows[0].p} k=${rows[0].k} n=${rows[0].n} df=${rows[0].df}\n` +
      rows.map((r) => `level ${r.level.toFixed(2)}: rejected ${r.nrp_pct.toFixed(2)}% (MC se ${r.mc_se_pct.toFixed(2)})`).join("\n");
  });

init().then(() => ($("status").textContent = "Ready."));
