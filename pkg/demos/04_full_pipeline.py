"""Trace files to a standalone C proxy program, end to end.

Uses the same entry points as the CLI: generate an 8-rank fixture,
compress + merge, solve compute combinations, emit C, and (when a C
compiler is on PATH) build it against the bundled shim and replay one
rank to show the logged call sequence.
"""

import os
import shutil
import subprocess
import tempfile
from pathlib import Path

from proxysynth.cli import main as cli

workdir = Path(tempfile.mkdtemp(prefix="proxydemo-"))
traces = workdir / "traces"
build = workdir / "build"

print("working in", workdir)
assert cli(["gen-trace", "--out", str(traces), "--ranks", "8",
            "--pattern", "stencil", "--iterations", "500",
            "--jitter", "0.02", "--seed", "1"]) == 0

print("\n=== pipeline ===")
assert cli(["pipeline", "--traces", str(traces), "--out", str(build),
            "--scale", "10"]) == 0

proxy = build / "proxy.c"
print(f"\ngenerated {proxy} ({proxy.stat().st_size} bytes)")
print("first lines:")
for line in proxy.read_text().splitlines()[:12]:
    print("   ", line)

cc = shutil.which("gcc") or shutil.which("cc")
if cc is None:
    print("\n(no C compiler found; skipping the replay)")
else:
    print("\n=== compile against the shim and replay rank 3 ===")
    subprocess.run(
        [cc, "-std=c99", "-O1", "-DMPI_PROXY_SHIM", f"-I{build}",
         str(proxy), "-o", str(build / "proxy")],
        check=True,
    )
    env = dict(os.environ, MPI_PROXY_RANK="3", MPI_PROXY_SIZE="8",
               MPI_PROXY_LOG=str(build / "rank3.log"))
    subprocess.run([str(build / "proxy")], check=True, env=env)
    lines = (build / "rank3.log").read_text().splitlines()
    print(f"rank 3 replayed {len(lines)} events; first five:")
    for line in lines[:5]:
        print("   ", line)
    print("\nCompile the same file with mpicc (no -DMPI_PROXY_SHIM) to run it")
    print("as a real MPI program:  mpicc proxy.c -o proxy && mpirun -np 8 proxy")
