"""Deterministic fake TTS engine for tests and pipeline dry runs.

Emits a 16 kHz mono tone whose length tracks the text at 150 words per
minute (so downstream validation accepts it), or copies a reference
clip. Stdlib-only on purpose: hundreds of these run per pipeline test
and interpreter startup dominates.
"""

from __future__ import annotations

import argparse
import math
import shutil
import sys
import zlib
from array import array
from pathlib import Path

RATE = 16000
WORDS_PER_MINUTE = 150.0


def tone_bytes(text: str) -> bytes:
    words = max(len(text.split()), 1)
    n = int(round(words / WORDS_PER_MINUTE * 60.0 * RATE))
    freq = 200.0 + (zlib.crc32(text.encode("utf-8")) % 600)
    step = 2.0 * math.pi * freq / RATE
    samples = array("h", (int(12000 * math.sin(step * i)) for i in range(n)))
    if sys.byteorder == "big":
        samples.byteswap()
    pcm = samples.tobytes()
    header = b"RIFF" + (36 + len(pcm)).to_bytes(4, "little") + b"WAVE"
    header += b"fmt " + (16).to_bytes(4, "little")
    header += (1).to_bytes(2, "little") + (1).to_bytes(2, "little")
    header += RATE.to_bytes(4, "little") + (RATE * 2).to_bytes(4, "little")
    header += (2).to_bytes(2, "little") + (16).to_bytes(2, "little")
    header += b"data" + len(pcm).to_bytes(4, "little")
    return header + pcm


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="stub TTS engine")
    parser.add_argument("--text", required=True)
    parser.add_argument("--output", required=True)
    parser.add_argument("--reference", nargs="*", default=[])
    parser.add_argument("--mode", choices=("tone", "copy"), default="tone")
    args = parser.parse_args(argv)

    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    if args.mode == "copy":
        if not args.reference:
            parser.error("copy mode needs --reference")
        shutil.copyfile(args.reference[0], out)
    else:
        out.write_bytes(tone_bytes(args.text))
    return 0


if __name__ == "__main__":
    sys.exit(main())
