// Poll scheduling with bounded exponential backoff: 2 s while healthy,
// doubling to a 30 s ceiling while the API is unreachable. No retry storms.

export class Backoff {
  private readonly base: number;
  private readonly max: number;
  private current: number;

  constructor(base = 2000, max = 30000) {
    this.base = base;
    this.max = max;
    this.current = base;
  }

  get interval(): number {
    return this.current;
  }

  failure(): number {
    this.current = Math.min(this.current * 2, this.max);
    return this.current;
  }

  success(): number {
    this.current = this.base;
    return this.current;
  }
}
