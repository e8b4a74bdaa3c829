// Cosmetic elapsed-time display. Authoritative event times always come from
// service acknowledgments, never from this clock.

export function formatElapsed(seconds: number): string {
  const whole = Math.max(0, Math.floor(seconds));
  const mins = Math.floor(whole / 60)
    .toString()
    .padStart(2, '0');
  const secs = (whole % 60).toString().padStart(2, '0');
  return `${mins}:${secs}`;
}

export class Stopwatch {
  private startMs = 0;
  private intervalId: ReturnType<typeof setInterval> | null = null;

  start(onTick: (display: string) => void, periodMs = 1000): void {
    this.startMs = Date.now();
    onTick(formatElapsed(0));
    this.intervalId = setInterval(() => {
      onTick(formatElapsed((Date.now() - this.startMs) / 1000));
    }, periodMs);
  }

  stop(): void {
    if (this.intervalId !== null) {
      clearInterval(this.intervalId);
      this.intervalId = null;
    }
  }
}
