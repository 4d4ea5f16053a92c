"""Provisioning of pinned solc binaries.

The compiler under test is always an external executable speaking
``--standard-json``. When no native binary is available, this module can
fabricate one from the official soljson builds published on npm: it installs
``solc@<version>`` into a cache directory and writes a small wrapper script
around the node shim. The harness itself never knows the difference.
"""

from __future__ import annotations

import os
import shutil
import subprocess
from importlib import resources
from pathlib import Path


class ProvisionError(Exception):
    pass


def _alias(version: str) -> str:
    return "solc-" + version.replace(".", "_")


def ensure_solc(version: str, cache_dir: str | Path) -> Path:
    """Return a solc-compatible executable pinned to `version`.

    Repeated calls are cheap: the npm install and wrapper are cached under
    `cache_dir` keyed by version.
    """
    cache = Path(cache_dir).resolve()
    bin_dir = cache / "bin"
    wrapper = bin_dir / f"solc-{version}"
    module_dir = cache / "node_modules" / _alias(version)
    if wrapper.is_file() and module_dir.is_dir():
        return wrapper

    if shutil.which("node") is None or shutil.which("npm") is None:
        raise ProvisionError(
            "node/npm not found; install a native solc binary and pass it "
            "with --solc instead")

    cache.mkdir(parents=True, exist_ok=True)
    bin_dir.mkdir(parents=True, exist_ok=True)
    pkg_json = cache / "package.json"
    if not pkg_json.exists():
        pkg_json.write_text('{"name": "idol-solc-cache", "private": true}\n')

    if not module_dir.is_dir():
        # --save keeps earlier aliases in package.json so later installs
        # do not prune them from node_modules
        cmd = ["npm", "install", "--prefix", str(cache), "--no-audit",
               "--no-fund", "--save", "--loglevel=error",
               f"{_alias(version)}@npm:solc@{version}"]
        proc = subprocess.run(cmd, capture_output=True, text=True, timeout=600)
        if proc.returncode != 0 or not module_dir.is_dir():
            raise ProvisionError(
                f"npm install of solc@{version} failed:\n{proc.stderr[-2000:]}")

    shim_src = resources.files("idol.solcshim").joinpath("shim.js").read_text()
    shim_path = cache / "shim.js"
    if not shim_path.exists() or shim_path.read_text() != shim_src:
        shim_path.write_text(shim_src)

    wrapper.write_text(
        "#!/bin/sh\n"
        f'exec node "{shim_path}" "{module_dir}" "$@"\n')
    wrapper.chmod(wrapper.stat().st_mode | 0o755)
    return wrapper


def default_cache_dir() -> Path:
    env = os.environ.get("IDOL_SOLC_CACHE")
    if env:
        return Path(env)
    return Path.home() / ".cache" / "idol-solc"
