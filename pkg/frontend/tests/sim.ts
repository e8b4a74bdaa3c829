// A simulated labeling service implementing the backend's state-machine
// rules, used by property tests and as a fetch-free ApiClient stand-in.

import { ApiClient, ApiError, ConnectivityError, EventIntent, StationName } from '../src/api.js';

export class SimService {
  open: StationName | null = null;
  finalized = false;
  log: { intent: EventIntent; t: number }[] = [];
  private clock = 0;
  /** When true, recordEvent fails like an unreachable network. */
  offline = false;

  recordEvent(intent: EventIntent): number {
    if (this.offline) throw new ConnectivityError('offline');
    if (this.finalized) throw new ApiError(409, 'state_conflict', 'finalized');
    if (intent.kind === 'station_start') {
      if (!intent.station) throw new ApiError(400, 'validation', 'station required');
      if (this.open !== null) throw new ApiError(409, 'state_conflict', `${this.open} open`);
      this.open = intent.station;
    } else if (intent.kind === 'station_stop') {
      if (this.open === null) throw new ApiError(409, 'state_conflict', 'no station open');
      if (intent.station !== this.open) {
        throw new ApiError(409, 'state_conflict', `open station is ${this.open}`);
      }
      this.open = null;
    } else if (intent.kind !== 'fna') {
      throw new ApiError(400, 'validation', `unknown kind ${intent.kind}`);
    }
    this.clock += 1;
    this.log.push({ intent, t: this.clock });
    return this.clock;
  }

  /** Duck-typed ApiClient exposing only what EventQueue uses. */
  asClient(): ApiClient {
    const sim = this;
    return {
      async recordEvent(_sessionId: string, intent: EventIntent): Promise<number> {
        return sim.recordEvent(intent);
      },
    } as unknown as ApiClient;
  }
}
