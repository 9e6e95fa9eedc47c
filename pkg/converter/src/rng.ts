/**
 * Deterministic random numbers for synthetic checkpoints and fixtures.
 *
 * Marsaglia xorshift32: state' = state ^= state << 13, ^= state >>> 17,
 * ^= state << 5 (all on uint32). A draw maps the top 24 bits to a
 * float32 in [-1, 1): fround((state >>> 8) / 2^24 * 2 - 1). This exact
 * recipe is recorded in fixture index files so any implementation can
 * regenerate the inputs bit for bit.
 */

export class XorShift32 {
  private state: number;

  constructor(seed: number) {
    this.state = seed >>> 0;
    if (this.state === 0) {
      // The all-zero state is a fixed point; substitute a documented nonzero one.
      this.state = 0x9e3779b9;
    }
  }

  nextU32(): number {
    let x = this.state;
    x ^= (x << 13) >>> 0;
    x >>>= 0;
    x ^= x >>> 17;
    x ^= (x << 5) >>> 0;
    x >>>= 0;
    this.state = x;
    return x;
  }

  /** One float32 uniformly in [-1, 1). */
  nextFloat(): number {
    return Math.fround(((this.nextU32() >>> 8) / 0x1000000) * 2 - 1);
  }

  fill(target: Float32Array, scale = 1): Float32Array {
    for (let i = 0; i < target.length; i += 1) {
      target[i] = Math.fround(this.nextFloat() * scale);
    }
    return target;
  }
}

export const GENERATOR_DOC =
  "xorshift32(seed): x^=x<<13; x^=x>>>17; x^=x<<5 (uint32); " +
  "value = fround((x>>>8)/2^24*2-1), one draw per element in C-order";
