// Client-side mirror of the service's one-open-station state machine.
// Taps are translated into event intents; a tap on another station while one
// is open becomes a stop-then-start pair so the service model stays minimal.

import type { EventIntent, StationName } from './api.js';

export const STATIONS: StationName[] = ['Station1', 'Station2', 'Station3'];

export class SessionStateMachine {
  openStation: StationName | null = null;

  /** Event intents for tapping a station button, applied optimistically. */
  tapStation(station: StationName): EventIntent[] {
    let intents: EventIntent[];
    if (this.openStation === station) {
      intents = [{ kind: 'station_stop', station }];
      this.openStation = null;
    } else if (this.openStation !== null) {
      intents = [
        { kind: 'station_stop', station: this.openStation },
        { kind: 'station_start', station },
      ];
      this.openStation = station;
    } else {
      intents = [{ kind: 'station_start', station }];
      this.openStation = station;
    }
    return intents;
  }

  tapFna(): EventIntent[] {
    return [{ kind: 'fna' }];
  }

  /** Roll the optimistic state back after the service rejected an intent. */
  rollback(rejected: EventIntent): void {
    if (rejected.kind === 'station_start') {
      this.openStation = null;
    } else if (rejected.kind === 'station_stop') {
      this.openStation = rejected.station ?? null;
    }
  }

  /** Reconcile with the authoritative open station (e.g. after a refresh). */
  reset(openStation: StationName | null): void {
    this.openStation = openStation;
  }
}

/** Derive the open station from an acknowledged event sequence. */
export function openStationOf(events: EventIntent[]): StationName | null {
  let open: StationName | null = null;
  for (const ev of events) {
    if (ev.kind === 'station_start') open = ev.station ?? null;
    else if (ev.kind === 'station_stop') open = null;
  }
  return open;
}
