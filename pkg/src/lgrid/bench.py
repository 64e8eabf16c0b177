"""Benchmark driver comparing the embedded delegation flow against the
external-repository baseline.

Both modes run the same job cycle (delegate, submit, status, output) against
a scripted-executor gateway; an artificial per-round-trip latency is
injected on every connection involved, so the measured gap isolates the two
flows' round-trip economics.  Delegation-attributable connections, round
trips and bytes come from the protocol transcripts.
"""

from __future__ import annotations

import csv
import statistics
import tempfile
import time
from dataclasses import dataclass, field
from io import StringIO
from pathlib import Path

from lgrid.client import GatewayClient
from lgrid.delegation.myproxy import MyProxyServer, myproxy_put
from lgrid.gateway import Gateway, GatewayConfig, VoRule
from lgrid.pki import TrustStore
from lgrid.pki.identity import create_ca, issue_user_cert

BENCH_JDL = 'Executable="bench-job"; StdOutput="out.txt";'
CSV_COLUMNS = ("mode", "iter", "seconds", "connections", "round_trips", "bytes")


@dataclass(frozen=True)
class BenchSample:
    mode: str
    iteration: int
    seconds: float
    connections: int
    round_trips: int
    bytes: int


@dataclass
class ModeSummary:
    mode: str
    mean_seconds: float
    stdev_seconds: float
    connections: int
    round_trips: int
    mean_bytes: float


@dataclass
class BenchReport:
    rtt_ms: float
    samples: list[BenchSample] = field(default_factory=list)

    def summary(self, mode: str) -> ModeSummary:
        picked = [s for s in self.samples if s.mode == mode]
        if not picked:
            raise ValueError(f"no samples for mode {mode!r}")
        seconds = [s.seconds for s in picked]
        return ModeSummary(
            mode=mode,
            mean_seconds=statistics.mean(seconds),
            stdev_seconds=statistics.stdev(seconds) if len(seconds) > 1 else 0.0,
            connections=max(s.connections for s in picked),
            round_trips=max(s.round_trips for s in picked),
            mean_bytes=statistics.mean(s.bytes for s in picked),
        )

    def gap_seconds(self) -> float:
        return self.summary("external").mean_seconds - self.summary("embedded").mean_seconds

    def to_csv(self) -> str:
        out = StringIO()
        writer = csv.writer(out)
        writer.writerow(CSV_COLUMNS)
        for s in self.samples:
            writer.writerow(
                [s.mode, s.iteration, f"{s.seconds:.6f}", s.connections, s.round_trips, s.bytes]
            )
        return out.getvalue()

    def to_table(self) -> str:
        lines = [
            f"injected rtt: {self.rtt_ms:.0f} ms",
            f"{'mode':<10} {'mean s':>9} {'stdev s':>9} {'conns':>6} {'rtrips':>7} {'bytes':>9}",
        ]
        for mode in ("embedded", "external"):
            try:
                s = self.summary(mode)
            except ValueError:
                continue
            lines.append(
                f"{s.mode:<10} {s.mean_seconds:>9.3f} {s.stdev_seconds:>9.3f} "
                f"{s.connections:>6d} {s.round_trips:>7d} {s.mean_bytes:>9.0f}"
            )
        if {"embedded", "external"} <= {s.mode for s in self.samples}:
            lines.append(f"gap (external - embedded): {self.gap_seconds():.3f} s")
        return "\n".join(lines)


class BenchHarness:
    """Self-hosted gateway + external repository, with one throwaway user."""

    def __init__(self, rtt_ms: float, state_dir: Path | str | None = None) -> None:
        self.rtt_ms = rtt_ms
        self._tempdir = tempfile.TemporaryDirectory(prefix="lgrid-bench-") if state_dir is None else None
        self.state_dir = Path(self._tempdir.name) if self._tempdir else Path(state_dir)

        self.ca = create_ca("/C=IT/O=LGridBench/CN=Bench CA")
        self.user = issue_user_cert(self.ca, "/C=IT/O=LGridBench/CN=runner")
        self.trust = TrustStore(anchors=[self.ca.cert])

        self.myproxy = MyProxyServer(port=0)
        self.myproxy.start()

        config = GatewayConfig(
            port=0,
            state_root=self.state_dir / "gateway-state",
            vo_rules=[VoRule(name="bench", patterns=("/C=IT/O=LGridBench/*",), operations=("delegate", "submit", "status", "output", "cancel"))],
            myproxy_host=self.myproxy.endpoint[0],
            myproxy_port=self.myproxy.endpoint[1],
            myproxy_rtt_ms=rtt_ms,
            executor_kind="scripted",
            executor_stage_delay=0.0,
        )
        self.gateway = Gateway(config, trust=self.trust)
        self.gateway.start()

    def close(self) -> None:
        self.gateway.shutdown()
        self.myproxy.shutdown()
        self.myproxy.server_close()
        if self._tempdir is not None:
            self._tempdir.cleanup()

    def __enter__(self) -> "BenchHarness":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # -- one iteration per mode -------------------------------------------------

    def run_embedded(self, iteration: int) -> BenchSample:
        rtt = self.rtt_ms / 1000.0
        client = GatewayClient(self.gateway.base_url, rtt_seconds=rtt)
        started = time.perf_counter()
        _ack, _token, transcript = client.delegate(
            self.user.cert, self.user.keypair.private_key, 3600
        )
        job_id = client.submit(BENCH_JDL)["job_ids"][0]
        client.wait_terminal(job_id, interval=0.01, timeout=60)
        client.job_output(job_id)
        elapsed = time.perf_counter() - started
        client.close()
        return BenchSample(
            mode="embedded",
            iteration=iteration,
            seconds=elapsed,
            connections=transcript.connection_count,
            round_trips=transcript.round_trip_count,
            bytes=transcript.total_bytes,
        )

    def run_external(self, iteration: int) -> BenchSample:
        rtt = self.rtt_ms / 1000.0
        client = GatewayClient(self.gateway.base_url, rtt_seconds=rtt)
        credential = self.user.cert_pem() + self.user.key_pem()
        started = time.perf_counter()
        _receipt, put_transcript = myproxy_put(
            self.myproxy.endpoint, "runner", "bench-pass", credential, rtt_seconds=rtt
        )
        doc = client.submit(
            BENCH_JDL, myproxy={"username": "runner", "passphrase": "bench-pass", "lifetime": 3600}
        )
        job_id = doc["job_ids"][0]
        client.wait_terminal(job_id, interval=0.01, timeout=60)
        client.job_output(job_id)
        elapsed = time.perf_counter() - started
        client.close()
        fetch = doc["credential_fetch"]
        return BenchSample(
            mode="external",
            iteration=iteration,
            seconds=elapsed,
            connections=put_transcript.connection_count + fetch["connections"],
            round_trips=put_transcript.round_trip_count + fetch["round_trips"],
            bytes=put_transcript.total_bytes + fetch["bytes"],
        )


def run_bench(rtt_ms: float, iterations: int, mode: str = "both") -> BenchReport:
    """Run the comparison; `mode` is embedded, external, or both."""
    if mode not in ("embedded", "external", "both"):
        raise ValueError(f"unknown mode {mode!r}")
    report = BenchReport(rtt_ms=rtt_ms)
    with BenchHarness(rtt_ms) as harness:
        for iteration in range(iterations):
            if mode in ("embedded", "both"):
                report.samples.append(harness.run_embedded(iteration))
            if mode in ("external", "both"):
                report.samples.append(harness.run_external(iteration))
    return report
