import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from lgrid.cli import main
from lgrid.gateway import Gateway, GatewayConfig, VoRule
from lgrid.jobs import unpack
from lgrid.pki.identity import build_p12

TEST_VO = VoRule(
    name="testers",
    patterns=("/C=IT/O=Test/*",),
    operations=("delegate", "submit", "status", "output", "cancel"),
)


@pytest.fixture(autouse=True)
def isolated_home(tmp_path, monkeypatch):
    home = tmp_path / "home"
    home.mkdir()
    monkeypatch.setenv("HOME", str(home))
    return home


@pytest.fixture()
def gateway(tmp_path, trust):
    config = GatewayConfig(port=0, state_root=tmp_path / "gw-state", vo_rules=[TEST_VO])
    gw = Gateway(config, trust=trust)
    gw.start()
    yield gw
    gw.shutdown()


@pytest.fixture()
def pem_dir(tmp_path, alice):
    d = tmp_path / "creds"
    d.mkdir()
    (d / "usercert.pem").write_bytes(alice.cert_pem())
    (d / "userkey.pem").write_bytes(alice.key_pem())
    return d


def run(args) -> int:
    return main([str(a) for a in args])


class TestConvert:
    def test_roundtrip(self, tmp_path, alice, capsys):
        p12 = tmp_path / "alice.p12"
        p12.write_bytes(build_p12(alice, "secret"))
        out = tmp_path / "out"
        assert run(["convert", "--p12", p12, "--out", out, "--passphrase", "secret"]) == 0
        assert (out / "usercert.pem").exists()
        key_file = out / "userkey.pem"
        assert key_file.exists()
        assert (key_file.stat().st_mode & 0o777) == 0o600

    def test_wrong_passphrase_exit_2(self, tmp_path, alice):
        p12 = tmp_path / "alice.p12"
        p12.write_bytes(build_p12(alice, "secret"))
        assert run(["convert", "--p12", p12, "--out", tmp_path / "o", "--passphrase", "nope"]) == 2

    def test_missing_file_exit_1(self, tmp_path):
        assert run(["convert", "--p12", tmp_path / "ghost.p12", "--out", tmp_path, "--passphrase", "x"]) == 1


class TestDelegate:
    def test_happy_path_caches_token(self, gateway, pem_dir, isolated_home, capsys):
        code = run([
            "delegate", "--cert", pem_dir / "usercert.pem", "--key", pem_dir / "userkey.pem",
            "--gateway", gateway.base_url, "--lifetime", 3600,
        ])
        assert code == 0
        out = capsys.readouterr().out
        assert "proxy fingerprint:" in out
        token_file = isolated_home / ".lgrid" / "token"
        assert token_file.exists()
        assert (token_file.stat().st_mode & 0o777) == 0o600
        assert token_file.read_text().strip()

    def test_unreachable_gateway_exit_3(self, pem_dir):
        code = run([
            "delegate", "--cert", pem_dir / "usercert.pem", "--key", pem_dir / "userkey.pem",
            "--gateway", "http://127.0.0.1:1",
        ])
        assert code == 3

    def test_substitution_fault_exit_4(self, pem_dir, bob):
        # a rogue service that answers every Init with a CSR for Bob
        from cryptography.hazmat.primitives import serialization as ser

        from lgrid.delegation.messages import CsrReply, encode_frame, encode_message
        from lgrid.pki import create_proxy_csr, generate_keypair

        foreign_csr = create_proxy_csr(bob.dn, generate_keypair())
        csr_pem = foreign_csr.public_bytes(ser.Encoding.PEM).decode()

        class Rogue(BaseHTTPRequestHandler):
            def do_POST(self):
                self.rfile.read(int(self.headers.get("Content-Length", 0)))
                frame = encode_frame(encode_message(CsrReply(session_id="x", csr_pem=csr_pem)))
                self.send_response(200)
                self.send_header("Content-Length", str(len(frame)))
                self.end_headers()
                self.wfile.write(frame)

            def log_message(self, *a):
                pass

        server = ThreadingHTTPServer(("127.0.0.1", 0), Rogue)
        threading.Thread(target=server.serve_forever, daemon=True).start()
        try:
            code = run([
                "delegate", "--cert", pem_dir / "usercert.pem", "--key", pem_dir / "userkey.pem",
                "--gateway", f"http://127.0.0.1:{server.server_address[1]}",
            ])
            assert code == 4
        finally:
            server.shutdown()
            server.server_close()


class TestJobCommands:
    def _delegate(self, gateway, pem_dir):
        assert run([
            "delegate", "--cert", pem_dir / "usercert.pem", "--key", pem_dir / "userkey.pem",
            "--gateway", gateway.base_url,
        ]) == 0

    def test_end_to_end_echo_job(self, gateway, pem_dir, tmp_path, capsys):
        self._delegate(gateway, pem_dir)
        script = tmp_path / "echo.sh"
        script.write_bytes(b'#!/bin/sh\necho "via the cli"\n')
        jdl = tmp_path / "job.jdl"
        jdl.write_text('Executable="echo.sh"; StdOutput="out.txt"; OutputSandbox={"out.txt"};')
        capsys.readouterr()

        assert run(["submit", "--jdl", jdl, "--input", script, "--gateway", gateway.base_url]) == 0
        job_id = capsys.readouterr().out.strip().splitlines()[-1]
        assert job_id.startswith("lgrid://")

        assert run(["watch", "--id", job_id, "--interval", "0.05", "--gateway", gateway.base_url]) == 0
        out = capsys.readouterr().out
        assert "DONE_OK" in out and "[green]" in out

        dest = tmp_path / "results"
        assert run(["output", "--id", job_id, "--dest", dest, "--gateway", gateway.base_url]) == 0
        assert (dest / "out.txt").read_text() == "via the cli\n"

    def test_parametric_prints_three_ids(self, gateway, pem_dir, tmp_path, capsys):
        self._delegate(gateway, pem_dir)
        jdl = tmp_path / "par.jdl"
        jdl.write_text(
            'JobType="Parametric"; Executable="/bin/echo"; Arguments="_PARAM_"; '
            "Parameters=6; ParameterStart=0; ParameterStep=2;"
        )
        capsys.readouterr()
        assert run(["submit", "--jdl", jdl, "--gateway", gateway.base_url]) == 0
        ids = capsys.readouterr().out.strip().splitlines()
        assert len(ids) == 3

    def test_status_unknown_id_exit_5(self, gateway, pem_dir):
        self._delegate(gateway, pem_dir)
        code = run([
            "status", "--id", "lgrid://localhost/11111111-1111-1111-1111-111111111111",
            "--gateway", gateway.base_url,
        ])
        assert code == 5

    def test_status_all_and_cancel(self, gateway, pem_dir, tmp_path, capsys):
        self._delegate(gateway, pem_dir)
        script = tmp_path / "slow.sh"
        script.write_bytes(b"#!/bin/sh\nsleep 30\n")
        jdl = tmp_path / "slow.jdl"
        jdl.write_text('Executable="slow.sh";')
        capsys.readouterr()
        run(["submit", "--jdl", jdl, "--input", script, "--gateway", gateway.base_url])
        job_id = capsys.readouterr().out.strip()

        assert run(["status", "--all", "--gateway", gateway.base_url]) == 0
        assert job_id in capsys.readouterr().out

        assert run(["cancel", "--id", job_id, "--gateway", gateway.base_url]) == 0
        assert "CANCELLED" in capsys.readouterr().out

        # repeated status never mutates state
        assert run(["status", "--id", job_id, "--gateway", gateway.base_url]) == 0
        assert run(["status", "--id", job_id, "--gateway", gateway.base_url]) == 0
        assert "CANCELLED" in capsys.readouterr().out

    def test_submit_bad_jdl_exit_7(self, gateway, pem_dir, tmp_path):
        self._delegate(gateway, pem_dir)
        jdl = tmp_path / "bad.jdl"
        jdl.write_text("Executable=;")
        assert run(["submit", "--jdl", jdl, "--gateway", gateway.base_url]) == 7
