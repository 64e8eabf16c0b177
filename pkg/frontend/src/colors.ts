/** Job monitor rows: state determines color via one fixed lookup. */

export const STATE_COLORS: Record<string, string> = {
  RUNNING: "blue",
  DONE_OK: "green",
  ABORTED: "red",
  CANCELLED: "orange",
  CLEARED: "gray",
};

export const TERMINAL_STATES = ["DONE_OK", "DONE_FAILED", "ABORTED", "CANCELLED", "CLEARED"];

export function stateColor(state: string): string {
  return STATE_COLORS[state] ?? "neutral";
}

export interface ApiJob {
  id: string;
  state: string;
  color?: string;
  submitted_at: string;
  last_update: string;
}

export interface JobView {
  id: string;
  shortId: string;
  state: string;
  color: string;
  submittedAt: string;
  lastUpdate: string;
  downloadable: boolean;
}

/** Pure function of one jobs-list response entry. */
export function toJobView(job: ApiJob): JobView {
  const uuid = job.id.split("/").pop() ?? job.id;
  return {
    id: job.id,
    shortId: uuid.slice(0, 8),
    state: job.state,
    color: stateColor(job.state),
    submittedAt: job.submitted_at,
    lastUpdate: job.last_update,
    downloadable: job.state === "DONE_OK" || job.state === "DONE_FAILED",
  };
}
