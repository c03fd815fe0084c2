#!/usr/bin/env python3
"""Lint ADR files and make sure docs/adr/README.md indexes every one of them.

Policy: files are named 0000-title.md, carry Context/Decision/Consequences
sections, and appear as a line in the index. Exit 1 on any problem so
pre-commit blocks.
"""

from __future__ import annotations

import re
import sys
from pathlib import Path

ADR_DIR = Path(__file__).resolve().parents[1] / 'docs' / 'adr'
INDEX_FILE = ADR_DIR / 'README.md'
REQ_SECTIONS = ('## Context', '## Decision', '## Consequences')

rx = re.compile(r'^\d{4}-[a-z0-9-]+\.md$')


def main() -> int:
    try:
        index_text = INDEX_FILE.read_text(encoding='utf-8')
    except FileNotFoundError:
        print('ADR index missing', file=sys.stderr)
        return 1
    ok = True
    for p in sorted(ADR_DIR.glob('*.md')):
        if p.name in {'README.md', 'TEMPLATE.md'}:
            continue
        if not rx.match(p.name):
            print(f'[ADR LINT] Bad filename: {p.name} (expected 0000-title.md)', file=sys.stderr)
            ok = False
            continue
        text = p.read_text(encoding='utf-8')
        for sec in REQ_SECTIONS:
            if sec not in text:
                print(f'[ADR LINT] Missing section {sec} in {p.name}', file=sys.stderr)
                ok = False
        if p.name not in index_text:
            print(f'[ADR LINT] Index is missing {p.name}', file=sys.stderr)
            ok = False
    return 0 if ok else 1


if __name__ == '__main__':
    sys.exit(main())
