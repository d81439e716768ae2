"""
Tensor files and the command line
=================================

Write a tensor in the binary format, then drive the ``qcpd`` command from
Python. The same commands work from a shell.
"""

import json
import subprocess
import sys
import tempfile
from pathlib import Path

import numpy as np

from qcpd.tensorfile import encode_tensor, read_tensor, write_tensor

tmp = Path(tempfile.mkdtemp())

# 24-byte header for a 2-way tensor, then float64 data in row-major order
t = np.arange(6.0).reshape(2, 3)
print(encode_tensor(t)[:24].hex(" ", 4))
write_tensor(tmp / "small.qtns", t)
assert read_tensor(tmp / "small.qtns").tobytes() == t.tobytes()


def qcpd(*args):
    out = subprocess.run([sys.executable, "-m", "qcpd", *map(str, args)], capture_output=True, text=True)
    print("$ qcpd", " ".join(map(str, args)), f"-> exit {out.returncode}")
    print((out.stdout + out.stderr).strip()[:400])
    return out


qcpd("gen", "--shape", "32,24,9", "--rank", "4", "--noise", "0.01", "--seed", "1", "--output", tmp / "t.qtns")
qcpd("qfactorize", "--input", tmp / "t.qtns", "--rank", "4", "--bits", "4",
     "--report", tmp / "q.json", "--trace", tmp / "trace.csv", "--hw", "3,3")
rep = json.loads((tmp / "q.json").read_text())
print({k: rep[k] for k in ("e_quant", "sweeps", "bops")})
print((tmp / "trace.csv").read_text().splitlines()[:3])

qcpd("compare", "--input", tmp / "t.qtns", "--rank", "4", "--bits", "4", "--report", tmp / "c.json")
print(json.loads((tmp / "c.json").read_text())["winners"])

# malformed input is a usage error with the byte offset of the problem
(tmp / "bad.qtns").write_bytes(encode_tensor(t)[:-4])
qcpd("qfactorize", "--input", tmp / "bad.qtns", "--rank", "1")
