/**
 * Upright oriented-box math mirroring src/semisample/geometry.py.
 *
 * Only the pieces the augmentor decides with live here: yaw normalization,
 * boundary-inclusive point containment, and the strict separating-axis
 * overlap test with its world-axis early-out. Expression order matches the
 * Python source so float64 results are identical bit for bit.
 */

export interface Box {
  cx: number;
  cy: number;
  cz: number;
  dx: number;
  dy: number;
  dz: number;
  yaw: number;
}

const TWO_PI = 2.0 * Math.PI;

export function normalizeYaw(yaw: number): number {
  let r = yaw - TWO_PI * Math.floor((yaw + Math.PI) / TWO_PI);
  if (r >= Math.PI) {
    r -= TWO_PI;
  }
  if (r < -Math.PI) {
    r += TWO_PI;
  }
  return r;
}

export function makeBox(
  cx: number, cy: number, cz: number,
  dx: number, dy: number, dz: number,
  yaw: number,
): Box {
  if (!(dx > 0 && dy > 0 && dz > 0)) {
    throw new RangeError(`box size must be strictly positive, got (${dx}, ${dy}, ${dz})`);
  }
  if (![cx, cy, cz, dx, dy, dz, yaw].every(Number.isFinite)) {
    throw new RangeError("box parameters must be finite");
  }
  return { cx, cy, cz, dx, dy, dz, yaw: normalizeYaw(yaw) };
}

/** Boundary-inclusive containment of a point given the box's cos/sin. */
export function pointInBox(
  px: number, py: number, pz: number, box: Box, c: number, s: number,
): boolean {
  const dx = px - box.cx;
  const dy = py - box.cy;
  const dz = pz - box.cz;
  const lx = dx * c + dy * s;
  const ly = dy * c - dx * s;
  return (
    Math.abs(lx) <= box.dx / 2.0 &&
    Math.abs(ly) <= box.dy / 2.0 &&
    Math.abs(dz) <= box.dz / 2.0
  );
}

/**
 * Precomputed collision parameters:
 * [cx, cy, cos, sin, hx, hy, aabbEx, aabbEy, z0, z1].
 */
export type BevParams = [
  number, number, number, number, number,
  number, number, number, number, number,
];

export function bevParams(box: Box): BevParams {
  const c = Math.cos(box.yaw);
  const s = Math.sin(box.yaw);
  const hx = box.dx / 2.0;
  const hy = box.dy / 2.0;
  const ac = Math.abs(c);
  const as_ = Math.abs(s);
  const hz = box.dz / 2.0;
  return [
    box.cx,
    box.cy,
    c,
    s,
    hx,
    hy,
    hx * ac + hy * as_,
    hx * as_ + hy * ac,
    box.cz - hz,
    box.cz + hz,
  ];
}

/** Strict separating-axis overlap on precomputed parameters. */
export function bevOverlapParams(p: BevParams, q: BevParams): boolean {
  const dx = q[0] - p[0];
  const dy = q[1] - p[1];
  if (Math.abs(dx) >= p[6] + q[6] || Math.abs(dy) >= p[7] + q[7]) {
    return false;
  }
  const ca = p[2], sa = p[3], hax = p[4], hay = p[5];
  const cb = q[2], sb = q[3], hbx = q[4], hby = q[5];
  const axes: Array<[number, number]> = [
    [ca, sa], [-sa, ca], [cb, sb], [-sb, cb],
  ];
  for (const [ux, uy] of axes) {
    const t = Math.abs(dx * ux + dy * uy);
    const ra = hax * Math.abs(ca * ux + sa * uy) + hay * Math.abs(ca * uy - sa * ux);
    const rb = hbx * Math.abs(cb * ux + sb * uy) + hby * Math.abs(cb * uy - sb * ux);
    if (t >= ra + rb) {
      return false;
    }
  }
  return true;
}

export function collides(p: BevParams, q: BevParams, full3d: boolean): boolean {
  if (!bevOverlapParams(p, q)) {
    return false;
  }
  if (!full3d) {
    return true;
  }
  return Math.min(p[9], q[9]) > Math.max(p[8], q[8]);
}
