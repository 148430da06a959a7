import logging
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from kan.cw import FIXTURES, dump_complex


def generate_fixtures(basepath=None):
    basepath = basepath or os.path.dirname(os.path.abspath(__file__))
    os.makedirs(basepath, exist_ok=True)
    for name, build in FIXTURES.items():
        dump_complex(build(), os.path.join(basepath, f"{name}.json"))
    logging.info(f"Wrote {len(FIXTURES)} complexes to {basepath}")


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO)
    generate_fixtures()
