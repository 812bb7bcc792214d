"""Time matrix assembly with and without the numba kernels.

Each variant runs in a fresh interpreter so the environment flag
``NONLOCAL_INTERFACE_NO_JIT`` is read at import time. The JIT timing excludes
compilation (one warm-up assembly first); the interpreter timing is a single
run. Both variants must produce the same matrix.

    python benchmarks/bench_jit.py [--h 0.05] [--dim 1] [--repeat 3]
"""
import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from nonlocal_interface import JIT_ENABLED, geometry as geo
from nonlocal_interface.assembly import assemble_matrix
from nonlocal_interface.kernel import CompositeKernel, KernelSpec
from nonlocal_interface.mesh import FESpace, build_mesh

h, dim, repeat = float(sys.argv[1]), int(sys.argv[2]), int(sys.argv[3])
cfg = (geo.interval_config if dim == 1 else geo.rectangle_config)(0.2, 0.4)
decomp = geo.decompose(cfg)
space = FESpace(build_mesh(decomp, h))
ck = CompositeKernel(KernelSpec("fractional", dim, 0.2, 0.2),
                     KernelSpec("fractional", dim, 0.4, 0.4), decomp)
if JIT_ENABLED:
    assemble_matrix(space, ck)
times = []
for _ in range(repeat if JIT_ENABLED else 1):
    t0 = time.perf_counter()
    A = assemble_matrix(space, ck)
    times.append(time.perf_counter() - t0)
M = A.full()
print(json.dumps({"jit": JIT_ENABLED, "seconds": min(times), "nnz": int(M.nnz),
                  "dofs": space.num_dofs, "checksum": float(abs(M).sum()),
                  "diag": [float(v) for v in M.diagonal()[:5]]}))
"""


def run(no_jit: bool, args) -> dict:
    env = dict(os.environ)
    env["NONLOCAL_INTERFACE_NO_JIT"] = "1" if no_jit else "0"
    out = subprocess.run([sys.executable, "-c", WORKER, str(args.h), str(args.dim),
                          str(args.repeat)], env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--h", type=float, default=0.05)
    parser.add_argument("--dim", type=int, choices=(1, 2), default=1)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()
    jit = run(False, args)
    plain = run(True, args)
    print(f"assembly dim={args.dim} h={args.h}: {jit['dofs']} dofs, {jit['nnz']} nonzeros")
    print(f"  numba       {jit['seconds']:9.3f} s")
    print(f"  interpreter {plain['seconds']:9.3f} s   (x{plain['seconds'] / jit['seconds']:.0f})")
    same = abs(jit["checksum"] - plain["checksum"]) <= 1e-12 * jit["checksum"]
    print(f"  matrices agree: {same}")
    return 0 if same else 1


if __name__ == "__main__":
    sys.exit(main())
