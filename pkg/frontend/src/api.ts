// Typed client for the labeling service HTTP API. The UI talks to the
// service exclusively through this module.

export type StationName = 'Station1' | 'Station2' | 'Station3';
export type EventKind = 'station_start' | 'station_stop' | 'fna';

export interface EventIntent {
  kind: EventKind;
  station?: StationName;
}

export interface Interval {
  station: StationName;
  t_start: number;
  t_end: number;
}

export interface ProcedureRecord {
  id: string;
  patient_ref: string;
  intervals: Interval[];
  fna_times: number[];
  session_duration: number;
  warnings: string[];
}

export interface ProcedureSummary {
  id: string;
  patient_ref: string;
  state: 'live' | 'finalized';
  event_count: number;
  created_at: number;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

/** Network-level failure (service unreachable), as opposed to a 4xx/5xx reply. */
export class ConnectivityError extends Error {}

export interface ApiConfig {
  baseUrl: string;
  token?: string;
  fetchFn?: typeof fetch;
}

export class ApiClient {
  private fetchFn: typeof fetch;

  constructor(private config: ApiConfig) {
    this.fetchFn = config.fetchFn ?? fetch.bind(globalThis);
  }

  private headers(): Record<string, string> {
    const h: Record<string, string> = { 'Content-Type': 'application/json' };
    if (this.config.token) h['X-EUSML-Token'] = this.config.token;
    return h;
  }

  private async request(path: string, init?: RequestInit): Promise<Response> {
    let res: Response;
    try {
      res = await this.fetchFn(`${this.config.baseUrl}${path}`, {
        ...init,
        headers: { ...this.headers(), ...(init?.headers ?? {}) },
      });
    } catch (err) {
      throw new ConnectivityError(String(err));
    }
    if (!res.ok) {
      let code = 'error';
      let message = `HTTP ${res.status}`;
      try {
        const body = await res.json();
        code = body.code ?? code;
        message = body.message ?? message;
      } catch {
        // non-JSON error body; keep the defaults
      }
      throw new ApiError(res.status, code, message);
    }
    return res;
  }

  async createProcedure(patientRef: string): Promise<string> {
    const res = await this.request('/procedures', {
      method: 'POST',
      body: JSON.stringify({ patient_ref: patientRef }),
    });
    return (await res.json()).id;
  }

  /** Returns the server-assigned timestamp for the event. */
  async recordEvent(sessionId: string, intent: EventIntent): Promise<number> {
    const res = await this.request(`/procedures/${sessionId}/events`, {
      method: 'POST',
      body: JSON.stringify(intent),
    });
    return (await res.json()).t_assigned;
  }

  async finalize(sessionId: string): Promise<ProcedureRecord> {
    const res = await this.request(`/procedures/${sessionId}/finalize`, { method: 'POST' });
    return res.json();
  }

  async getRecord(sessionId: string): Promise<ProcedureRecord> {
    const res = await this.request(`/procedures/${sessionId}`);
    return res.json();
  }

  async exportText(sessionId: string, format: 'csv' | 'json'): Promise<string> {
    const res = await this.request(`/procedures/${sessionId}/export?format=${format}`);
    return res.text();
  }

  async listProcedures(state?: 'live' | 'finalized'): Promise<ProcedureSummary[]> {
    const query = state ? `?state=${state}` : '';
    const res = await this.request(`/procedures${query}`);
    return res.json();
  }
}
