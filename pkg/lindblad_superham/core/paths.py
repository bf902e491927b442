import os
from pathlib import Path
import logging

# Allowed base directories
USER_HOME = Path.home()
ALLOWED_BASE_DIRS = [
    USER_HOME / ".lindblad-superham",  # Default
    Path("/tmp/lindblad-superham"),    # Temp
    USER_HOME / ".local" / "share" / "lindblad-superham",  # Linux
]
BLOCKED_PREFIXES = ['/system/', '/library/apple', '/usr/', '/bin/', '/sbin/', '/etc/', '/proc/', '/sys/']


def is_safe_path(path: Path) -> bool:
    """Check if path is safe to write reports or logs to"""
    try:
        abs_path = path.resolve()

        for allowed in ALLOWED_BASE_DIRS:
            try:
                abs_path.relative_to(allowed.resolve())
                return True
            except ValueError:
                continue

        path_str = str(abs_path).lower() + '/'
        if any(path_str.startswith(block) for block in BLOCKED_PREFIXES):
            logging.error(f"⚠️ Path blocked (system directory): {abs_path}")
            return False
        return True

    except Exception as e:
        logging.error(f"Path validation error: {e}")
        return False


def get_data_dir() -> Path:
    """Returns the base data directory, defaults to ~/.lindblad-superham."""
    env_dir = os.getenv("SUPERHAM_DATA_DIR")

    if env_dir:
        requested_path = Path(env_dir).absolute()
        if not is_safe_path(requested_path):
            logging.error(
                f"❌ SUPERHAM_DATA_DIR points to unsafe location: {requested_path}\n"
                f"   Falling back to default: {USER_HOME / '.lindblad-superham'}"
            )
            return (USER_HOME / ".lindblad-superham").absolute()
        return requested_path

    return (USER_HOME / ".lindblad-superham").absolute()


def get_config_path() -> Path:
    """Returns the path to settings.yaml (env override, then ./config, then data dir)."""
    env_path = os.getenv("SUPERHAM_CONFIG_PATH")
    if env_path:
        path = Path(env_path).absolute()
        if is_safe_path(path):
            return path
        logging.warning("SUPERHAM_CONFIG_PATH unsafe, using default")
    local = Path.cwd() / "config" / "settings.yaml"
    if local.exists():
        return local
    return get_data_dir() / "config" / "settings.yaml"


def get_log_path() -> Path:
    """Returns the log file path."""
    env_path = os.getenv("SUPERHAM_LOG_FILE")
    if env_path:
        # Special case: stdout/stderr are allowed
        if env_path.lower() in ['stdout', 'stderr']:
            return Path(env_path)
        path = Path(env_path).absolute()
        if is_safe_path(path):
            return path
        logging.warning("SUPERHAM_LOG_FILE unsafe, using default")
    return get_data_dir() / "superham.log"


def get_output_dir(requested: str = None) -> Path:
    """Returns the report directory: explicit argument, SUPERHAM_OUT_DIR, then ./reports."""
    candidate = requested or os.getenv("SUPERHAM_OUT_DIR")
    if candidate:
        path = Path(candidate).absolute()
        if is_safe_path(path):
            return path
        logging.warning(f"Output directory unsafe: {path}, using ./reports")
    return (Path.cwd() / "reports").absolute()

