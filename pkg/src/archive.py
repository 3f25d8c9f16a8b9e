# -*- coding: utf-8 -*-

import logging
import shutil
from datetime import datetime
from pathlib import Path
from typing import Optional, Tuple, Union

from . import config
from .utils import sanitize_label

log = logging.getLogger(__name__)


def create_run_archive(
    run_dir: Union[str, Path],
    label: str = "run",
    archive_dir: Optional[Union[str, Path]] = None,
) -> Tuple[bool, Optional[Path], Optional[str]]:
    """
    Zips a training run directory (checkpoint, training log, config).
    Returns (success, archive_path, archive_name).
    """
    run_dir = Path(run_dir)
    archive_dir = Path(archive_dir) if archive_dir is not None else config.ARCHIVE_DIR
    if not run_dir.is_dir():
        log.error(f"Run directory {run_dir} does not exist; nothing to archive")
        return False, None, None

    try:
        timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
        archive_name = f"run_{timestamp}_{sanitize_label(label)}.zip"
        archive_path = archive_dir / archive_name
        archive_dir.mkdir(parents=True, exist_ok=True)

        log.info(f"📦 Creating archive {archive_path} from {run_dir}")
        shutil.make_archive(
            str(archive_path.with_suffix("")),  # make_archive appends .zip
            "zip",
            root_dir=run_dir,
            base_dir=".",
        )
        log.info(f"Archive created: {archive_name} ({archive_path.stat().st_size} bytes)")
        return True, archive_path, archive_name
    except OSError as e:
        log.error(f"Failed to create archive: {e}", exc_info=True)
        return False, None, None
