// The three-screen annotation app: start a procedure, capture station/FNA
// events live, then review, finalize, and export. All state shown to the
// clinician is either server-acknowledged or explicitly marked pending.

import { ApiClient, ProcedureRecord, StationName } from './api.js';
import { EventQueue, QueuedEvent } from './queue.js';
import { SessionStateMachine, STATIONS } from './state.js';
import { Stopwatch } from './stopwatch.js';

export class App {
  session: SessionStateMachine = new SessionStateMachine();
  queue: EventQueue | null = null;
  sessionId: string | null = null;
  patientRef = '';
  private stopwatch = new Stopwatch();

  constructor(
    private root: HTMLElement,
    private api: ApiClient,
  ) {}

  // -- screen 1: start -----------------------------------------------------

  showStart(error?: string): void {
    this.stopwatch.stop();
    this.root.innerHTML = `
      <section data-screen="start">
        <h1>New procedure</h1>
        ${error ? `<div class="banner error" data-testid="error-banner">${error}</div>` : ''}
        <form data-testid="start-form">
          <label>Patient reference
            <input name="patient_ref" data-testid="patient-ref" value="${this.patientRef}" />
          </label>
          <span class="invalid" data-testid="invalid-ref" hidden>enter a patient reference</span>
          <button type="submit" data-testid="start-button">Start procedure</button>
        </form>
      </section>`;
    const form = this.root.querySelector('[data-testid="start-form"]') as HTMLFormElement;
    form.addEventListener('submit', (ev) => {
      ev.preventDefault();
      void this.handleStart();
    });
  }

  async handleStart(): Promise<void> {
    const input = this.root.querySelector('[data-testid="patient-ref"]') as HTMLInputElement;
    const invalid = this.root.querySelector('[data-testid="invalid-ref"]') as HTMLElement;
    this.patientRef = input.value;
    if (!this.patientRef.trim()) {
      invalid.hidden = false; // inline validation, no request sent
      return;
    }
    try {
      this.sessionId = await this.api.createProcedure(this.patientRef);
    } catch (err) {
      this.showStart(`service error: ${err instanceof Error ? err.message : err}`);
      return;
    }
    this.session = new SessionStateMachine();
    this.queue = new EventQueue(this.api, this.sessionId, {
      onAck: () => this.renderFeed(),
      onReject: (ev) => this.handleRejected(ev),
      onConnectivity: () => this.renderConnectivity(),
    });
    this.showLive();
  }

  // -- screen 2: live capture ----------------------------------------------

  showLive(): void {
    const buttons = STATIONS.map(
      (s) =>
        `<button data-testid="station-${s}" data-station="${s}" class="station">${s}</button>`,
    ).join('');
    this.root.innerHTML = `
      <section data-screen="live">
        <header>
          <span data-testid="clock">00:00</span>
          <span data-testid="connectivity" class="online">online</span>
        </header>
        <div class="stations">${buttons}</div>
        <button data-testid="fna-button">FNA</button>
        <button data-testid="to-review">Review</button>
        <div data-testid="toast" hidden></div>
        <ol data-testid="event-feed"></ol>
      </section>`;
    for (const station of STATIONS) {
      const btn = this.stationButton(station);
      btn.addEventListener('click', () => this.tapStation(station));
    }
    (this.root.querySelector('[data-testid="fna-button"]') as HTMLElement).addEventListener(
      'click',
      () => this.tapFna(),
    );
    (this.root.querySelector('[data-testid="to-review"]') as HTMLElement).addEventListener(
      'click',
      () => void this.showReview(),
    );
    this.stopwatch.start((display) => {
      const clock = this.root.querySelector('[data-testid="clock"]');
      if (clock) clock.textContent = display;
    });
    this.renderButtons();
  }

  stationButton(station: StationName): HTMLElement {
    return this.root.querySelector(`[data-testid="station-${station}"]`) as HTMLElement;
  }

  tapStation(station: StationName): void {
    if (!this.queue) return;
    for (const intent of this.session.tapStation(station)) {
      this.queue.enqueue(intent);
    }
    this.renderButtons();
    this.renderFeed();
  }

  tapFna(): void {
    if (!this.queue) return;
    for (const intent of this.session.tapFna()) {
      this.queue.enqueue(intent);
    }
    this.renderFeed();
  }

  private handleRejected(ev: QueuedEvent): void {
    // visual rollback of the optimistic toggle plus a toast
    this.session.rollback(ev.intent);
    this.renderButtons();
    this.renderFeed();
    const toast = this.root.querySelector('[data-testid="toast"]') as HTMLElement | null;
    if (toast) {
      toast.hidden = false;
      toast.textContent = `event rejected: ${ev.error ?? 'conflict'}`;
    }
  }

  renderButtons(): void {
    for (const station of STATIONS) {
      const btn = this.stationButton(station);
      if (btn) btn.classList.toggle('active', this.session.openStation === station);
    }
  }

  renderConnectivity(): void {
    const el = this.root.querySelector('[data-testid="connectivity"]') as HTMLElement | null;
    if (el && this.queue) {
      el.textContent = this.queue.online ? 'online' : 'offline';
      el.className = this.queue.online ? 'online' : 'offline';
    }
  }

  renderFeed(): void {
    const feed = this.root.querySelector('[data-testid="event-feed"]');
    if (!feed || !this.queue) return;
    feed.innerHTML = this.queue.events
      .map((ev) => {
        const label = ev.intent.station ? `${ev.intent.kind} ${ev.intent.station}` : ev.intent.kind;
        const when =
          ev.status === 'acked'
            ? `t=${ev.tAssigned?.toFixed(3)}`
            : ev.status === 'rejected'
              ? 'rejected'
              : 'pending';
        return `<li data-status="${ev.status}">${label} <em>${when}</em></li>`;
      })
      .join('');
  }

  // -- screen 3: review + export --------------------------------------------

  async showReview(): Promise<void> {
    if (!this.sessionId) return;
    this.stopwatch.stop();
    let record: ProcedureRecord;
    try {
      record = await this.api.getRecord(this.sessionId);
    } catch (err) {
      this.showStart(`service error: ${err instanceof Error ? err.message : err}`);
      return;
    }
    this.renderReview(record, false);
  }

  renderReview(record: ProcedureRecord, finalized: boolean): void {
    const rows = record.intervals
      .map((iv) => {
        const warned = record.warnings.some((w) => w.includes('auto-closed'));
        const badge =
          warned && iv.t_end === record.session_duration
            ? ' <span class="badge" data-testid="auto-close-badge">auto-closed</span>'
            : '';
        return `<tr><td>${iv.station}</td><td>${iv.t_start.toFixed(3)}</td><td>${iv.t_end.toFixed(3)}</td><td>${badge}</td></tr>`;
      })
      .join('');
    this.root.innerHTML = `
      <section data-screen="review">
        <h1>Review ${record.patient_ref}</h1>
        <table data-testid="interval-table"><tbody>${rows}</tbody></table>
        <p data-testid="fna-count">FNA events: ${record.fna_times.length}</p>
        <button data-testid="finalize-button" ${finalized ? 'disabled' : ''}>Finalize</button>
        <button data-testid="export-csv" ${finalized ? '' : 'disabled'}>Export CSV</button>
        <button data-testid="export-json" ${finalized ? '' : 'disabled'}>Export JSON</button>
        <button data-testid="back-to-live" ${finalized ? 'disabled' : ''}>Back</button>
        <pre data-testid="export-output" hidden></pre>
        <div data-testid="review-error" hidden></div>
      </section>`;
    (this.root.querySelector('[data-testid="finalize-button"]') as HTMLButtonElement).addEventListener(
      'click',
      () => void this.handleFinalize(),
    );
    (this.root.querySelector('[data-testid="export-csv"]') as HTMLButtonElement).addEventListener(
      'click',
      () => void this.handleExport('csv'),
    );
    (this.root.querySelector('[data-testid="export-json"]') as HTMLButtonElement).addEventListener(
      'click',
      () => void this.handleExport('json'),
    );
    (this.root.querySelector('[data-testid="back-to-live"]') as HTMLButtonElement).addEventListener(
      'click',
      () => this.showLive(),
    );
  }

  async handleFinalize(): Promise<void> {
    if (!this.sessionId) return;
    try {
      const record = await this.api.finalize(this.sessionId);
      this.renderReview(record, true);
    } catch (err) {
      const banner = this.root.querySelector('[data-testid="review-error"]') as HTMLElement;
      banner.hidden = false;
      banner.textContent = `finalize failed, refresh and retry: ${err instanceof Error ? err.message : err}`;
    }
  }

  /** Fetch the export and surface it for download/inspection. */
  async handleExport(format: 'csv' | 'json'): Promise<string> {
    if (!this.sessionId) return '';
    const text = await this.api.exportText(this.sessionId, format);
    const out = this.root.querySelector('[data-testid="export-output"]') as HTMLElement;
    out.hidden = false;
    out.textContent = text;
    return text;
  }
}

export function mount(root: HTMLElement, baseUrl: string, token?: string): App {
  const app = new App(root, new ApiClient({ baseUrl, token }));
  app.showStart();
  return app;
}
