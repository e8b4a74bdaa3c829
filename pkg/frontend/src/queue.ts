// Ordered submission queue with offline buffering. One event is in flight at
// a time so the service observes exactly the tap order; an OR network blip
// keeps events queued locally ("pending") until flush succeeds.

import { ApiClient, ApiError, ConnectivityError, EventIntent } from './api.js';

export interface QueuedEvent {
  seq: number;
  intent: EventIntent;
  status: 'pending' | 'acked' | 'rejected';
  /** Server-acknowledged timestamp; never fabricated client-side. */
  tAssigned?: number;
  error?: string;
}

export interface QueueCallbacks {
  onAck?: (ev: QueuedEvent) => void;
  onReject?: (ev: QueuedEvent) => void;
  onConnectivity?: (online: boolean) => void;
}

export class EventQueue {
  private items: QueuedEvent[] = [];
  private nextSeq = 0;
  private chain: Promise<void> = Promise.resolve();
  online = true;

  constructor(
    private api: ApiClient,
    private sessionId: string,
    private callbacks: QueueCallbacks = {},
  ) {}

  /** All events ever enqueued, in order, with their current status. */
  get events(): readonly QueuedEvent[] {
    return this.items;
  }

  get pending(): QueuedEvent[] {
    return this.items.filter((e) => e.status === 'pending');
  }

  enqueue(intent: EventIntent): QueuedEvent {
    const item: QueuedEvent = { seq: this.nextSeq++, intent, status: 'pending' };
    this.items.push(item);
    void this.flush();
    return item;
  }

  /**
   * Drain pending events in order. Drains are serialized: awaiting flush()
   * always covers one complete pass that started after the call.
   */
  flush(): Promise<void> {
    this.chain = this.chain.then(() => this.drain());
    return this.chain;
  }

  private async drain(): Promise<void> {
    for (const item of this.items) {
      if (item.status !== 'pending') continue;
      try {
        item.tAssigned = await this.api.recordEvent(this.sessionId, item.intent);
        item.status = 'acked';
        this.setOnline(true);
        this.callbacks.onAck?.(item);
      } catch (err) {
        if (err instanceof ConnectivityError) {
          this.setOnline(false);
          return; // keep this and everything after it pending, in order
        }
        if (err instanceof ApiError) {
          item.status = 'rejected';
          item.error = err.message;
          this.callbacks.onReject?.(item);
          continue;
        }
        throw err;
      }
    }
  }

  private setOnline(online: boolean): void {
    if (this.online !== online) {
      this.online = online;
      this.callbacks.onConnectivity?.(online);
    }
  }
}
