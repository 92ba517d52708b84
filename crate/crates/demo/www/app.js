// Glue for the benchaudit wasm demo. Expects the wasm-pack output in ./pkg
// (wasm-pack build crates/demo --target web --out-dir www/pkg).

import init, { tacd_sweep, mink_explorer, perturb_preview } from "./pkg/benchaudit_demo.js";

const $ = (id) => document.getElementById(id);

const CSS = getComputedStyle(document.documentElement);
const color = (name) => CSS.getPropertyValue(name).trim();

function clearCanvas(canvas) {
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  return ctx;
}

function axes(ctx, canvas, pad) {
  ctx.strokeStyle = color("--grid");
  ctx.lineWidth = 1;
  ctx.strokeRect(pad.l, pad.t, canvas.width - pad.l - pad.r, canvas.height - pad.t - pad.b);
}

function drawSeries(ctx, points, xOf, yOf, stroke, dashed = false) {
  ctx.strokeStyle = stroke;
  ctx.lineWidth = 2;
  ctx.setLineDash(dashed ? [5, 4] : []);
  ctx.beginPath();
  points.forEach((p, i) => {
    const x = xOf(p), y = yOf(p);
    if (i === 0) ctx.moveTo(x, y); else ctx.lineTo(x, y);
  });
  ctx.stroke();
  ctx.setLineDash([]);
  if (!dashed) {
    ctx.fillStyle = stroke;
    points.forEach((p) => {
      ctx.beginPath();
      ctx.arc(xOf(p), yOf(p), 3.5, 0, Math.PI * 2);
      ctx.fill();
    });
  }
}

function yLabels(ctx, canvas, pad, max) {
  ctx.fillStyle = color("--dim");
  ctx.font = "11px system-ui";
  for (let i = 0; i <= 4; i++) {
    const v = (max * i) / 4;
    const y = canvas.height - pad.b - ((canvas.height - pad.t - pad.b) * i) / 4;
    ctx.fillText(v.toFixed(2), 4, y + 4);
  }
}

// ---- panel 1: TACD sweep --------------------------------------------------

function renderSweep() {
  const request = {
    n_items: Number($("sweep-n").value),
    seed: Number($("sweep-seed").value),
    alpha: Number($("alpha").value),
    beta: Number($("beta").value),
    base_accuracy: Number($("base").value),
    p_list: [0, 10, 25, 50, 75, 100],
  };
  const collapse = $("collapse").value;
  if (collapse !== "") request.collapse_letter = Number(collapse);
  $("alpha-out").value = request.alpha.toFixed(2);
  $("beta-out").value = request.beta.toFixed(2);
  $("base-out").value = request.base_accuracy.toFixed(2);

  const out = JSON.parse(tacd_sweep(JSON.stringify(request)));
  if (out.error) { $("sweep-note").textContent = out.error; return; }
  const points = out.points;

  const canvas = $("sweep-chart");
  const ctx = clearCanvas(canvas);
  const pad = { l: 42, r: 12, t: 10, b: 24 };
  axes(ctx, canvas, pad);
  const xOf = (p) => pad.l + ((canvas.width - pad.l - pad.r) * p.p) / 100;
  const yOf = (v) => canvas.height - pad.b - (canvas.height - pad.t - pad.b) * Math.min(v, 1);
  yLabels(ctx, canvas, pad, 1);
  ctx.fillStyle = color("--dim");
  points.forEach((p) => ctx.fillText(`${p.p}%`, xOf(p) - 8, canvas.height - 8));

  drawSeries(ctx, points, xOf, (p) => yOf(p.clc_baseline), color("--dim"), true);
  drawSeries(ctx, points, xOf, (p) => yOf(p.idr_baseline), color("--dim"), true);
  drawSeries(ctx, points, xOf, (p) => yOf(p.idr), color("--accent2"));
  drawSeries(ctx, points, xOf, (p) => yOf(p.clc), color("--accent"));

  const last = points[points.length - 1];
  const collapsed = Object.entries(last.collapse_flags).filter(([, f]) => f).map(([l]) => l);
  const monotone = points.every((p, i) => i === 0 || p.clc > points[i - 1].clc);
  $("sweep-note").innerHTML =
    `At p=100: IDR ${last.idr.toFixed(3)} (chance ${last.idr_baseline.toFixed(2)}), ` +
    `CLC ${last.clc.toFixed(3)} (independence floor ${last.clc_baseline.toFixed(4)}), ` +
    `accuracy ${last.accuracy.toFixed(3)}. CLC strictly increasing: ${monotone}. ` +
    (collapsed.length ? `<span class="flag">Single-letter collapse in [${collapsed.join(", ")}]</span>` : "");
}

// ---- panel 2: Min-K explorer ----------------------------------------------

function histogram(values, lo, hi, bins) {
  const counts = new Array(bins).fill(0);
  const width = (hi - lo) / bins;
  values.forEach((v) => {
    const b = Math.min(bins - 1, Math.max(0, Math.floor((v - lo) / width)));
    counts[b] += 1;
  });
  return counts;
}

function renderMink() {
  const request = {
    n_texts: Number($("mink-n").value),
    seed: 7,
    p: Number($("mink-p").value),
    k_percent: Number($("k-percent").value),
    member_mean: Number($("member-mean").value),
    member_std: 0.2,
    nonmember_mean: Number($("nonmember-mean").value),
    nonmember_std: 0.8,
  };
  $("mink-p-out").value = request.p;
  $("mm-out").value = request.member_mean.toFixed(1);
  $("nm-out").value = request.nonmember_mean.toFixed(1);
  $("kp-out").value = request.k_percent;
  if (request.member_mean <= request.nonmember_mean) {
    $("auroc-label").textContent = "member mean must exceed non-member mean";
    return;
  }

  const out = JSON.parse(mink_explorer(JSON.stringify(request)));
  if (out.error) { $("auroc-label").textContent = out.error; return; }
  const all = out.member_scores.concat(out.nonmember_scores);
  if (all.length === 0) return;
  const lo = Math.min(...all) - 0.2, hi = Math.max(...all) + 0.2;
  const bins = 48;
  const member = histogram(out.member_scores, lo, hi, bins);
  const nonmember = histogram(out.nonmember_scores, lo, hi, bins);
  const peak = Math.max(...member, ...nonmember, 1);

  const canvas = $("mink-chart");
  const ctx = clearCanvas(canvas);
  const pad = { l: 42, r: 12, t: 10, b: 24 };
  axes(ctx, canvas, pad);
  const plotW = canvas.width - pad.l - pad.r;
  const plotH = canvas.height - pad.t - pad.b;
  const barW = plotW / bins;
  const draw = (counts, fill) => {
    ctx.fillStyle = fill;
    ctx.globalAlpha = 0.65;
    counts.forEach((c, i) => {
      const h = (plotH * c) / peak;
      ctx.fillRect(pad.l + i * barW, canvas.height - pad.b - h, barW - 1, h);
    });
    ctx.globalAlpha = 1;
  };
  draw(nonmember, color("--bad"));
  draw(member, color("--good"));
  ctx.fillStyle = color("--dim");
  ctx.font = "11px system-ui";
  ctx.fillText(lo.toFixed(1), pad.l, canvas.height - 8);
  ctx.fillText(hi.toFixed(1), canvas.width - pad.r - 24, canvas.height - 8);
  ctx.fillText("standardized min-k score", canvas.width / 2 - 60, canvas.height - 8);

  $("auroc-label").textContent =
    out.auroc === null
      ? `AUROC: n/a (one side empty at p=${request.p})`
      : `AUROC ${out.auroc.toFixed(3)} (${out.member_scores.length} member / ${out.nonmember_scores.length} non-member)`;
}

// ---- panel 3: perturbation preview ------------------------------------------

function renderPreview() {
  const choices = $("pv-choices").value.split("\n").map((s) => s.trim()).filter(Boolean);
  const request = {
    question: $("pv-question").value,
    choices,
    gold_index: Number($("pv-gold").value),
    seed: Number($("pv-seed").value),
    displace_gold: $("pv-displace").checked,
  };
  const out = JSON.parse(perturb_preview(JSON.stringify(request)));
  if (out.error) {
    $("pv-summary").textContent = out.error;
    $("pv-prompt").textContent = "—";
    return;
  }
  const letters = "ABCDEFGHIJKLMNOPQRSTUVWXYZ";
  $("pv-summary").textContent =
    `permutation (original→slot): [${out.permutation.join(", ")}] · ` +
    `gold moved ${letters[out.original_gold_index]}→${letters[out.displayed_gold_index]} · ` +
    `masked slot ${letters[out.masked_display_slot]} (hidden text: “${out.mask_reference}”)`;
  $("pv-prompt").textContent = out.prompt;
}

// ---- wiring -----------------------------------------------------------------

async function main() {
  await init();
  $("status").remove();
  for (const id of ["alpha", "beta", "base", "sweep-n", "sweep-seed", "collapse"]) {
    $(id).addEventListener("input", renderSweep);
  }
  for (const id of ["mink-p", "member-mean", "nonmember-mean", "k-percent", "mink-n"]) {
    $(id).addEventListener("input", renderMink);
  }
  $("pv-run").addEventListener("click", renderPreview);
  renderSweep();
  renderMink();
  renderPreview();
}

main().catch((e) => { $("status").textContent = `failed to load wasm: ${e}`; });
