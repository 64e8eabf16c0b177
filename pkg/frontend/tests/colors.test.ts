import { describe, expect, it } from "vitest";

import { stateColor, toJobView } from "../src/colors.js";

describe("the fixed state-color lookup", () => {
  it("maps exactly the five named states, neutral otherwise", () => {
    expect(stateColor("RUNNING")).toBe("blue");
    expect(stateColor("DONE_OK")).toBe("green");
    expect(stateColor("ABORTED")).toBe("red");
    expect(stateColor("CANCELLED")).toBe("orange");
    expect(stateColor("CLEARED")).toBe("gray");
    for (const other of ["SUBMITTED", "WAITING", "READY", "SCHEDULED", "DONE_FAILED"]) {
      expect(stateColor(other)).toBe("neutral");
    }
  });
});

describe("job views", () => {
  const job = {
    id: "lgrid://localhost/1f0e2d3c-aaaa-bbbb-cccc-ddddeeeeffff",
    state: "DONE_OK",
    submitted_at: "2026-08-09T10:00:00+00:00",
    last_update: "2026-08-09T10:00:05+00:00",
  };

  it("is a pure function of the response entry", () => {
    const first = toJobView(job);
    const second = toJobView(job);
    expect(first).toEqual(second);
    expect(first.shortId).toBe("1f0e2d3c");
    expect(first.color).toBe("green");
    expect(first.downloadable).toBe(true);
  });

  it("marks only finished jobs downloadable", () => {
    expect(toJobView({ ...job, state: "RUNNING" }).downloadable).toBe(false);
    expect(toJobView({ ...job, state: "CLEARED" }).downloadable).toBe(false);
    expect(toJobView({ ...job, state: "DONE_FAILED" }).downloadable).toBe(true);
  });
});
