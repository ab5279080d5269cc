// Hold-to-press pressure emulation: commodity pointers have no force sensing,
// so holding a pressure widget ramps the value up and releasing ramps it back
// down, preserving continuous low-to-high modulation.

export const RAMP_MS_DEFAULT = 200;

export class PressureRamp {
  private target = 0;
  private value = 0;
  private lastAt: number | null = null;

  constructor(private rampMs: number = RAMP_MS_DEFAULT) {}

  /** Hold at full pressure (or any analog level). */
  press(level = 1.0): void {
    this.target = Math.min(Math.max(level, 0), 1);
  }

  release(): void {
    this.target = 0;
  }

  /** Advance toward the target at the configured ramp rate; returns the value. */
  sample(at: number): number {
    if (this.lastAt === null) {
      this.lastAt = at;
      if (this.rampMs <= 0) this.value = this.target;
      return this.value;
    }
    const dt = Math.max(0, at - this.lastAt);
    this.lastAt = at;
    if (this.rampMs <= 0) {
      this.value = this.target;
      return this.value;
    }
    const step = dt / this.rampMs;
    if (this.target > this.value) this.value = Math.min(this.target, this.value + step);
    else this.value = Math.max(this.target, this.value - step);
    return this.value;
  }

  get current(): number {
    return this.value;
  }

  get active(): boolean {
    return this.value > 0 || this.target > 0;
  }
}
