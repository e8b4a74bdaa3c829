import { describe, expect, it } from 'vitest';

import { EventQueue } from '../src/queue.js';
import { SimService } from './sim.js';

describe('event queue', () => {
  it('acknowledges events in order with server timestamps', async () => {
    const sim = new SimService();
    const queue = new EventQueue(sim.asClient(), 'sid');
    queue.enqueue({ kind: 'station_start', station: 'Station1' });
    queue.enqueue({ kind: 'fna' });
    queue.enqueue({ kind: 'station_stop', station: 'Station1' });
    await queue.flush();
    expect(queue.events.map((e) => e.status)).toEqual(['acked', 'acked', 'acked']);
    expect(queue.events.map((e) => e.tAssigned)).toEqual([1, 2, 3]);
  });

  it('buffers offline taps and flushes them in order on reconnect', async () => {
    const sim = new SimService();
    sim.offline = true;
    const seen: boolean[] = [];
    const queue = new EventQueue(sim.asClient(), 'sid', {
      onConnectivity: (online) => seen.push(online),
    });
    queue.enqueue({ kind: 'station_start', station: 'Station2' });
    queue.enqueue({ kind: 'fna' });
    queue.enqueue({ kind: 'station_stop', station: 'Station2' });
    await queue.flush();
    expect(queue.pending.length).toBe(3);
    expect(sim.log.length).toBe(0);
    expect(queue.online).toBe(false);

    sim.offline = false;
    await queue.flush();
    expect(queue.pending.length).toBe(0);
    expect(sim.log.map((l) => l.intent.kind)).toEqual(['station_start', 'fna', 'station_stop']);
    expect(seen).toEqual([false, true]);
  });

  it('marks rejected events and keeps draining the rest', async () => {
    const sim = new SimService();
    const rejected: string[] = [];
    const queue = new EventQueue(sim.asClient(), 'sid', {
      onReject: (ev) => rejected.push(ev.intent.kind),
    });
    queue.enqueue({ kind: 'station_stop', station: 'Station1' }); // illegal: none open
    queue.enqueue({ kind: 'fna' });
    await queue.flush();
    expect(queue.events[0].status).toBe('rejected');
    expect(queue.events[1].status).toBe('acked');
    expect(rejected).toEqual(['station_stop']);
  });

  it('partial offline failure preserves the unsent suffix order', async () => {
    const sim = new SimService();
    const queue = new EventQueue(sim.asClient(), 'sid');
    queue.enqueue({ kind: 'station_start', station: 'Station1' });
    await queue.flush();
    sim.offline = true;
    queue.enqueue({ kind: 'fna' });
    queue.enqueue({ kind: 'station_stop', station: 'Station1' });
    await queue.flush();
    expect(queue.events.map((e) => e.status)).toEqual(['acked', 'pending', 'pending']);
    sim.offline = false;
    await queue.flush();
    expect(sim.log.map((l) => l.intent.kind)).toEqual(['station_start', 'fna', 'station_stop']);
  });
});
