"""Regenerate ``src/rapgen/data/pinyin_finals.tsv`` from pypinyin.

Dev-only helper; pypinyin is not a runtime dependency of rapgen.

    pip install pypinyin
    python tools/build_finals_table.py
"""
from pathlib import Path

from pypinyin import Style, lazy_pinyin
from pypinyin.constants import PINYIN_DICT

OUT = Path(__file__).resolve().parents[1] / "src" / "rapgen" / "data" / "pinyin_finals.tsv"


def main():
    lines = ["# character<TAB>pinyin final (most common reading, tone stripped)"]
    for code in range(0x4E00, 0x9FA6):
        if code not in PINYIN_DICT:
            continue
        ch = chr(code)
        final = lazy_pinyin(ch, style=Style.FINALS, strict=True)[0]
        if not final or final == ch:
            continue
        lines.append(f"{ch}\t{final}")
    OUT.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {len(lines) - 1} entries to {OUT}")


if __name__ == "__main__":
    main()
