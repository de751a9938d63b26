/** Client-side session history: append-only within a session. */

export interface HistoryEntry {
  readonly text: string;
  readonly summary: string;
  readonly timestamp: number;
}

export class SessionHistory {
  private readonly items: HistoryEntry[] = [];

  append(text: string, summary: string, timestamp: number = Date.now()): HistoryEntry {
    const entry: HistoryEntry = Object.freeze({ text, summary, timestamp });
    this.items.push(entry);
    return entry;
  }

  /** Snapshot in insertion order; mutating the copy cannot touch the log. */
  entries(): HistoryEntry[] {
    return [...this.items];
  }

  get length(): number {
    return this.items.length;
  }
}
