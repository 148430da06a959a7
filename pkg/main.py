import hydra
import logging
import os
import sys

from kan.cli import run


ROOT_DIR = os.getcwd()
logging.basicConfig(level=logging.INFO)

@hydra.main(version_base=None, config_path="cfg", config_name="config")
def main(cfg):
    logging.info(f"Project Root: {ROOT_DIR}")
    logging.info(f"Command: {cfg.command}")
    logging.info(f"Group: {cfg.group.name}")
    sys.exit(run(cfg))

if __name__ == "__main__":
    main()
