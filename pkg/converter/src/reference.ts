/**
 * Reference forward pass over a converted bundle.
 *
 * Mirrors the consuming pipeline's numerics: every layer accumulates
 * in float64 and stores its activation as float32 before the next one
 * reads it. The pass is deliberately plain loop code; it exists to
 * produce golden fixtures, not to be fast, though it still finishes a
 * single image in a few seconds.
 */

export interface ConvParams {
  outChannels: number;
  kernel: number;
  stride: number;
  pad: number;
  groups: number;
}

export interface Volume {
  channels: number;
  height: number;
  width: number;
  /** Row-major c, h, w. */
  data: Float32Array;
}

export const INPUT_SHAPE = { channels: 3, height: 227, width: 227 };

const LRN = { k: 1.0, n: 5, alpha: 1e-4, beta: 0.75 };

export function makeVolume(channels: number, height: number, width: number): Volume {
  return { channels, height, width, data: new Float32Array(channels * height * width) };
}

function padVolume(x: Volume, pad: number): Volume {
  if (pad === 0) {
    return x;
  }
  const out = makeVolume(x.channels, x.height + 2 * pad, x.width + 2 * pad);
  for (let c = 0; c < x.channels; c += 1) {
    for (let h = 0; h < x.height; h += 1) {
      const src = (c * x.height + h) * x.width;
      const dst = (c * out.height + h + pad) * out.width + pad;
      out.data.set(x.data.subarray(src, src + x.width), dst);
    }
  }
  return out;
}

export function conv2d(
  x: Volume,
  weights: Float32Array,
  bias: Float32Array,
  p: ConvParams,
): Volume {
  const inPerGroup = x.channels / p.groups;
  const outPerGroup = p.outChannels / p.groups;
  const outH = Math.floor((x.height + 2 * p.pad - p.kernel) / p.stride) + 1;
  const outW = Math.floor((x.width + 2 * p.pad - p.kernel) / p.stride) + 1;
  const padded = padVolume(x, p.pad);
  const out = makeVolume(p.outChannels, outH, outW);
  const k = p.kernel;
  const kk = k * k;
  const filterSize = inPerGroup * kk;

  for (let oc = 0; oc < p.outChannels; oc += 1) {
    const g = Math.floor(oc / outPerGroup);
    const wBase = oc * filterSize;
    const b = bias[oc];
    for (let oy = 0; oy < outH; oy += 1) {
      const iy = oy * p.stride;
      for (let ox = 0; ox < outW; ox += 1) {
        const ix = ox * p.stride;
        let acc = b;
        for (let ic = 0; ic < inPerGroup; ic += 1) {
          const cBase = (g * inPerGroup + ic) * padded.height;
          const wc = wBase + ic * kk;
          for (let ky = 0; ky < k; ky += 1) {
            const row = (cBase + iy + ky) * padded.width + ix;
            const wr = wc + ky * k;
            for (let kx = 0; kx < k; kx += 1) {
              acc += weights[wr + kx] * padded.data[row + kx];
            }
          }
        }
        out.data[(oc * outH + oy) * outW + ox] = Math.fround(acc);
      }
    }
  }
  return out;
}

export function relu(x: Volume): Volume {
  const out = makeVolume(x.channels, x.height, x.width);
  for (let i = 0; i < x.data.length; i += 1) {
    const v = x.data[i];
    out.data[i] = v > 0 ? v : 0;
  }
  return out;
}

export function lrn(x: Volume): Volume {
  const { k, n, alpha, beta } = LRN;
  const half = Math.floor(n / 2);
  const plane = x.height * x.width;
  const out = makeVolume(x.channels, x.height, x.width);
  for (let i = 0; i < plane; i += 1) {
    for (let c = 0; c < x.channels; c += 1) {
      const lo = Math.max(c - half, 0);
      const hi = Math.min(c + half + 1, x.channels);
      let wsum = 0;
      for (let j = lo; j < hi; j += 1) {
        const v = x.data[j * plane + i];
        wsum += v * v;
      }
      const denom = Math.pow(k + (alpha / n) * wsum, beta);
      out.data[c * plane + i] = Math.fround(x.data[c * plane + i] / denom);
    }
  }
  return out;
}

export function maxpool(x: Volume, size: number, stride: number): Volume {
  const outH = Math.floor((x.height - size) / stride) + 1;
  const outW = Math.floor((x.width - size) / stride) + 1;
  const out = makeVolume(x.channels, outH, outW);
  for (let c = 0; c < x.channels; c += 1) {
    for (let oy = 0; oy < outH; oy += 1) {
      for (let ox = 0; ox < outW; ox += 1) {
        let best = -Infinity;
        for (let ky = 0; ky < size; ky += 1) {
          const row = (c * x.height + oy * stride + ky) * x.width + ox * stride;
          for (let kx = 0; kx < size; kx += 1) {
            const v = x.data[row + kx];
            if (v > best) {
              best = v;
            }
          }
        }
        out.data[(c * outH + oy) * outW + ox] = best;
      }
    }
  }
  return out;
}

export function fullyConnected(
  x: Float32Array,
  weights: Float32Array,
  bias: Float32Array,
  outWidth: number,
): Float32Array {
  const inWidth = x.length;
  const out = new Float32Array(outWidth);
  for (let r = 0; r < outWidth; r += 1) {
    let acc = bias[r];
    const base = r * inWidth;
    for (let j = 0; j < inWidth; j += 1) {
      acc += weights[base + j] * x[j];
    }
    out[r] = Math.fround(acc);
  }
  return out;
}

export function reluVec(x: Float32Array): Float32Array {
  const out = new Float32Array(x.length);
  for (let i = 0; i < x.length; i += 1) {
    out[i] = x[i] > 0 ? x[i] : 0;
  }
  return out;
}

export function softmax(x: Float32Array): Float32Array {
  let max = -Infinity;
  for (let i = 0; i < x.length; i += 1) {
    if (x[i] > max) {
      max = x[i];
    }
  }
  let sum = 0;
  const e = new Float64Array(x.length);
  for (let i = 0; i < x.length; i += 1) {
    e[i] = Math.exp(x[i] - max);
    sum += e[i];
  }
  const out = new Float32Array(x.length);
  for (let i = 0; i < x.length; i += 1) {
    out[i] = Math.fround(e[i] / sum);
  }
  return out;
}

export interface ReferenceOutputs {
  /** Linear (pre-rectification) activation of the feature layer. */
  fc7: Float32Array;
  prob: Float32Array;
}

type TensorMap = Map<string, Float32Array>;

function tensor(tensors: TensorMap, layer: string, role: string): Float32Array {
  const t = tensors.get(`${layer}/${role}`);
  if (t === undefined) {
    throw new Error(`reference pass: bundle has no ${layer}/${role} tensor`);
  }
  return t;
}

/**
 * Run the full stack on one c,h,w image and return the two taps the
 * golden fixture records. Dropout layers are identity at inference
 * and are omitted.
 */
export function runReference(tensors: TensorMap, input: Float32Array): ReferenceOutputs {
  const { channels, height, width } = INPUT_SHAPE;
  if (input.length !== channels * height * width) {
    throw new Error(
      `reference pass: input has ${input.length} values, expected ${channels * height * width}`,
    );
  }
  const conv = (name: string, x: Volume, p: ConvParams) =>
    conv2d(x, tensor(tensors, name, "weights"), tensor(tensors, name, "bias"), p);
  const fc = (name: string, x: Float32Array, outWidth: number) =>
    fullyConnected(x, tensor(tensors, name, "weights"), tensor(tensors, name, "bias"), outWidth);

  let v: Volume = { channels, height, width, data: input };
  v = conv("conv1", v, { outChannels: 96, kernel: 11, stride: 4, pad: 0, groups: 1 });
  v = maxpool(lrn(relu(v)), 3, 2);
  v = conv("conv2", v, { outChannels: 256, kernel: 5, stride: 1, pad: 2, groups: 2 });
  v = maxpool(lrn(relu(v)), 3, 2);
  v = conv("conv3", v, { outChannels: 384, kernel: 3, stride: 1, pad: 1, groups: 1 });
  v = relu(v);
  v = conv("conv4", v, { outChannels: 384, kernel: 3, stride: 1, pad: 1, groups: 2 });
  v = relu(v);
  v = conv("conv5", v, { outChannels: 256, kernel: 3, stride: 1, pad: 1, groups: 2 });
  v = maxpool(relu(v), 3, 2);

  const flat = v.data; // already c,h,w row-major: 256 * 6 * 6 = 9216
  const fc6 = reluVec(fc("fc6", flat, 4096));
  const fc7 = fc("fc7", fc6, 4096);
  const fc8 = fc("fc8", reluVec(fc7), 1000);
  return { fc7, prob: softmax(fc8) };
}
