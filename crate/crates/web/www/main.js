import init, { mixup, lr_curve, beta_histogram } from "../pkg/freebies_web.js";

const $ = (id) => document.getElementById(id);

function paint(id, draw) {
  const c = $(id);
  const ctx = c.getContext("2d");
  draw(ctx, c.width, c.height);
  return ctx.getImageData(0, 0, c.width, c.height);
}

const imgA = paint("img-a", (ctx, w, h) => {
  const g = ctx.createLinearGradient(0, 0, w, h);
  g.addColorStop(0, "#1d4e89");
  g.addColorStop(1, "#7dcfb6");
  ctx.fillStyle = g;
  ctx.fillRect(0, 0, w, h);
  ctx.fillStyle = "#f9c74f";
  ctx.fillRect(30, 30, 60, 50);
});

const imgB = paint("img-b", (ctx, w, h) => {
  for (let y = 0; y < h; y += 20) {
    for (let x = 0; x < w; x += 20) {
      ctx.fillStyle = (x + y) % 40 ? "#f94144" : "#ffffff";
      ctx.fillRect(x, y, 20, 20);
    }
  }
});

function drawMix() {
  const lambda = Number($("lambda").value);
  $("lambda-value").textContent = lambda.toFixed(2);
  const w = Math.max(imgA.width, imgB.width);
  const h = Math.max(imgA.height, imgB.height);
  const rgba = mixup(imgA.data, imgA.width, imgA.height, imgB.data, imgB.width, imgB.height, lambda);
  const c = $("img-mix");
  c.width = w;
  c.height = h;
  c.getContext("2d").putImageData(new ImageData(new Uint8ClampedArray(rgba), w, h), 0, 0);
}

function plot(id, xs, ys, bars) {
  const c = $(id);
  const ctx = c.getContext("2d");
  const pad = 30;
  const [w, h] = [c.width - 2 * pad, c.height - 2 * pad];
  ctx.clearRect(0, 0, c.width, c.height);
  const xmax = Math.max(...xs) || 1;
  const ymax = Math.max(...ys) || 1;
  const px = (x) => pad + (x / xmax) * w;
  const py = (y) => pad + h - (y / ymax) * h;
  ctx.strokeStyle = "#888";
  ctx.strokeRect(pad, pad, w, h);
  ctx.fillStyle = "#333";
  ctx.fillText(ymax.toPrecision(3), 2, pad + 4);
  ctx.fillText(String(xmax), pad + w - 20, pad + h + 16);
  if (bars) {
    const bw = w / ys.length;
    ctx.fillStyle = "#4d908e";
    ys.forEach((y, i) => ctx.fillRect(pad + i * bw + 1, py(y), bw - 2, pad + h - py(y)));
    return;
  }
  ctx.strokeStyle = "#277da1";
  ctx.lineWidth = 2;
  ctx.beginPath();
  xs.forEach((x, i) => (i ? ctx.lineTo(px(x), py(ys[i])) : ctx.moveTo(px(x), py(ys[i]))));
  ctx.stroke();
}

function drawLr() {
  try {
    const milestones = new Uint32Array(
      $("milestones").value.split(",").map((s) => s.trim()).filter(Boolean).map(Number),
    );
    const flat = lr_curve(
      $("mode").value,
      Number($("base-lr").value),
      BigInt($("total").value),
      BigInt($("warmup").value),
      milestones,
      Number($("factor").value),
      400n,
    );
    const xs = [], ys = [];
    for (let i = 0; i < flat.length; i += 2) {
      xs.push(flat[i]);
      ys.push(flat[i + 1]);
    }
    plot("lr", xs, ys, false);
    $("lr-error").textContent = "";
  } catch (e) {
    $("lr-error").textContent = e.message ?? String(e);
  }
}

function drawBeta() {
  try {
    const bins = 40;
    const ys = Array.from(
      beta_histogram(Number($("alpha").value), Number($("beta").value), Number($("draws").value), bins, BigInt($("seed").value)),
    );
    plot("hist", ys.map((_, i) => i + 1), ys, true);
    $("beta-error").textContent = "";
  } catch (e) {
    $("beta-error").textContent = e.message ?? String(e);
  }
}

await init();
$("lambda").addEventListener("input", drawMix);
for (const id of ["mode", "base-lr", "total", "warmup", "milestones", "factor"]) {
  $(id).addEventListener("input", drawLr);
}
for (const id of ["alpha", "beta", "draws", "seed"]) {
  $(id).addEventListener("input", drawBeta);
}
drawMix();
drawLr();
drawBeta();
