import math
import os
import subprocess
import sys
from pathlib import Path
from tempfile import TemporaryDirectory

SRC = Path(__file__).resolve().parents[1] / 'src'

SCENARIO = """\
domain = truncated_line
halfwidth = 20
grid_n = 1023
g = 1
sigma = 1
"""


def main() -> None:
    with TemporaryDirectory() as td:
        p = Path(td)
        cfg = p / 'soliton.txt'
        cfg.write_text(SCENARIO, encoding='utf-8')
        proc = subprocess.run(
            [sys.executable, '-m', 'normheat', 'shoot', '--config', str(cfg), '--out', str(p / 'out')],
            capture_output=True,
            text=True,
            env=dict(os.environ, PYTHONPATH=str(SRC)),
        )
        print(proc.stdout)
        if proc.returncode != 0:
            print(proc.stderr, file=sys.stderr)
            sys.exit(proc.returncode)
        entries = dict(line.split(' = ', 1) for line in proc.stdout.splitlines() if ' = ' in line)
        amplitude = float(entries['result.shoot.amplitude'])
        # Simple assert in script mode: Q(0) = sqrt(2) for the cubic line soliton
        if abs(amplitude - math.sqrt(2.0)) > 1e-6:
            print(f'Unexpected soliton amplitude {amplitude!r}', file=sys.stderr)
            sys.exit(1)
        print('OK: cubic soliton amplitude is sqrt(2)', file=sys.stderr)


if __name__ == '__main__':
    main()
