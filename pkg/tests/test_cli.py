import json
import subprocess

import numpy as np
import pytest

from proxysynth.cli import EXIT_DATA, EXIT_OK, main
from proxysynth.solver import fixture_block_matrix
from util import GCC

needs_cc = pytest.mark.skipif(GCC is None, reason="no C compiler available")


def run(*argv):
    return main(list(argv))


def test_gen_trace_writes_files_and_spec(tmp_path, capsys):
    out = tmp_path / "traces"
    assert run("gen-trace", "--out", str(out), "--ranks", "3", "--iterations", "5") == EXIT_OK
    assert sorted(p.name for p in out.iterdir()) == [
        "spec.json", "trace.0.txt", "trace.1.txt", "trace.2.txt"
    ]
    report = capsys.readouterr().out
    assert "ranks=3" in report and "rank0_events=25" in report


def test_compress_reports_ratio(tmp_path, capsys):
    traces = tmp_path / "traces"
    run("gen-trace", "--out", str(traces), "--ranks", "2", "--iterations", "200")
    capsys.readouterr()
    out = tmp_path / "dumps"
    assert run("compress", "--traces", str(traces), "--out", str(out)) == EXIT_OK
    report = capsys.readouterr().out
    assert (out / "grammar.0.txt").is_file() and (out / "grammar.1.txt").is_file()
    ratio = float([l for l in report.splitlines() if l.startswith("total_ratio=")][0].split("=")[1])
    assert ratio > 10


def test_compress_empty_dir_is_data_error(tmp_path, capsys):
    empty = tmp_path / "none"
    empty.mkdir()
    assert run("compress", "--traces", str(empty), "--out", str(tmp_path / "o")) == EXIT_DATA
    assert "no trace files" in capsys.readouterr().err


def test_compress_missing_dir_is_data_error(tmp_path):
    assert run("compress", "--traces", str(tmp_path / "nope"), "--out", str(tmp_path)) == EXIT_DATA


def test_sparse_ranks_rejected(tmp_path):
    traces = tmp_path / "traces"
    run("gen-trace", "--out", str(traces), "--ranks", "3", "--iterations", "2")
    (traces / "trace.1.txt").unlink()
    assert run("compress", "--traces", str(traces), "--out", str(tmp_path / "o")) == EXIT_DATA


def test_merge_and_synthesize_chain(tmp_path, capsys):
    traces = tmp_path / "traces"
    dumps = tmp_path / "dumps"
    run("gen-trace", "--out", str(traces), "--ranks", "4", "--iterations", "30")
    run("compress", "--traces", str(traces), "--out", str(dumps))
    merged = tmp_path / "merged.txt"
    assert run("merge", "--dumps", str(dumps), "--out", str(merged)) == EXIT_OK
    assert merged.is_file()
    capsys.readouterr()
    proxy = tmp_path / "proxy.c"
    assert run("synthesize", "--merged", str(merged), "--out", str(proxy)) == EXIT_OK
    report = capsys.readouterr().out
    assert proxy.is_file() and (tmp_path / "mpi_proxy_shim.h").is_file()
    assert "max_rel_err=" in report


def test_synthesize_missing_block_matrix(tmp_path, capsys):
    traces = tmp_path / "traces"
    dumps = tmp_path / "dumps"
    run("gen-trace", "--out", str(traces), "--ranks", "2", "--iterations", "3")
    run("compress", "--traces", str(traces), "--out", str(dumps))
    merged = tmp_path / "merged.txt"
    run("merge", "--dumps", str(dumps), "--out", str(merged))
    rc = run("synthesize", "--merged", str(merged), "--out", str(tmp_path / "p.c"),
             "--block-matrix", str(tmp_path / "missing.txt"))
    assert rc == EXIT_DATA


def test_synthesize_missing_merged_dump(tmp_path):
    rc = run("synthesize", "--merged", str(tmp_path / "nope.txt"), "--out", str(tmp_path / "p.c"))
    assert rc == EXIT_DATA


def test_usage_error_exit_code(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["compress"])  # missing required flags
    assert exc.value.code == 2


def _write_spin_merged(tmp_path):
    """Merged dump with one compute terminal equal to 1000 spin iterations."""
    B = fixture_block_matrix()
    x = np.zeros(11)
    x[9] = 1000
    t = np.rint(B.b @ x).astype(int)
    key = "COMPUTE " + " ".join(str(v) for v in t)
    merged = tmp_path / "merged.txt"
    merged.write_text(
        "# world_size=1\n"
        f"T0 = {key}\n"
        "T1 = BARRIER comm=0\n"
        "S -> T1@{0} T0@{0} T1^2@{0}\n",
        encoding="utf-8",
    )
    return merged


def test_scale_flag_divides_compute_targets(tmp_path):
    # spin-only terminal: the emitted spin count tracks target/scale
    merged = _write_spin_merged(tmp_path)
    for scale, expect in ((1, "BLK_SPIN(1000LL);"), (10, "BLK_SPIN(100LL);")):
        out = tmp_path / f"p{scale}.c"
        assert run("synthesize", "--merged", str(merged), "--out", str(out),
                   "--scale", str(scale)) == EXIT_OK
        assert expect in out.read_text(encoding="utf-8")


def test_json_report(tmp_path):
    traces = tmp_path / "traces"
    run("gen-trace", "--out", str(traces), "--ranks", "2", "--iterations", "4")
    jpath = tmp_path / "report.json"
    run("compress", "--traces", str(traces), "--out", str(tmp_path / "d"), "--json", str(jpath))
    data = json.loads(jpath.read_text())
    assert data["ranks"] == 2 and "total_ratio" in data


def test_comm_model_file(tmp_path):
    merged = _write_spin_merged(tmp_path)
    model = tmp_path / "comm.txt"
    model.write_text("send 2e-6 4e-9\nrecv 2e-6 4e-9\ncollective 1e-5 1e-9\n")
    assert run("synthesize", "--merged", str(merged), "--out", str(tmp_path / "p.c"),
               "--comm-model", str(model)) == EXIT_OK


@needs_cc
def test_pipeline_end_to_end_compiles(tmp_path):
    traces = tmp_path / "traces"
    build = tmp_path / "build"
    run("gen-trace", "--out", str(traces), "--ranks", "4", "--pattern", "stencil",
        "--iterations", "25", "--jitter", "0.02", "--seed", "5")
    assert run("pipeline", "--traces", str(traces), "--out", str(build)) == EXIT_OK
    assert (build / "proxy.c").is_file()
    assert (build / "merged.txt").is_file()
    subprocess.run(
        [GCC, "-std=c99", "-Wall", "-Wextra", "-Werror", "-O1", "-DMPI_PROXY_SHIM",
         f"-I{build}", str(build / "proxy.c"), "-o", str(build / "proxy")],
        check=True,
    )


def test_periodic_trace_compression_ratio(tmp_path, capsys):
    # long periodic single-rank trace compresses by orders of magnitude
    run("gen-trace", "--out", str(tmp_path / "t"), "--ranks", "1", "--pattern", "ring",
        "--iterations", "20000")
    capsys.readouterr()
    assert run("compress", "--traces", str(tmp_path / "t"), "--out", str(tmp_path / "d")) == EXIT_OK
    report = capsys.readouterr().out
    ratio = float([l for l in report.splitlines() if l.startswith("total_ratio=")][0].split("=")[1])
    assert ratio > 1000
