/** Minimal per-frame line plot with a marker for the current frame. */
export function drawSeries(
  canvas: HTMLCanvasElement,
  values: (number | null)[],
  current: number,
  color: string,
  label: string,
): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const w = canvas.width;
  const h = canvas.height;
  ctx.clearRect(0, 0, w, h);
  ctx.fillStyle = "#181c22";
  ctx.fillRect(0, 0, w, h);
  const present = values.filter((v): v is number => v !== null && isFinite(v));
  ctx.fillStyle = "#8899aa";
  ctx.font = "10px sans-serif";
  ctx.fillText(label, 6, 12);
  if (present.length === 0) return;
  let lo = Math.min(...present);
  let hi = Math.max(...present);
  if (hi - lo < 1e-9) {
    hi = lo + 1;
  }
  const px = (i: number) => 4 + (i / Math.max(values.length - 1, 1)) * (w - 8);
  const py = (v: number) => h - 6 - ((v - lo) / (hi - lo)) * (h - 24);
  ctx.strokeStyle = color;
  ctx.lineWidth = 1.2;
  ctx.beginPath();
  let started = false;
  values.forEach((v, i) => {
    if (v === null || !isFinite(v)) return;
    if (!started) {
      ctx.moveTo(px(i), py(v));
      started = true;
    } else {
      ctx.lineTo(px(i), py(v));
    }
  });
  ctx.stroke();
  ctx.fillStyle = color;
  values.forEach((v, i) => {
    if (v === null || !isFinite(v)) return;
    ctx.beginPath();
    ctx.arc(px(i), py(v), i === current ? 3.2 : 1.5, 0, 2 * Math.PI);
    ctx.fill();
  });
}
