#!/usr/bin/env python3
"""Recompute templates/manifest.json after editing a template or demo.

Keeps the existing entry names and version; only the checksums change.
Run with --check to report stale entries without writing.
"""
import argparse
import hashlib
import json
import pathlib
import sys


def sha256(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def main():
    root = pathlib.Path(__file__).resolve().parent.parent / "templates"
    ap = argparse.ArgumentParser()
    ap.add_argument("--dir", type=pathlib.Path, default=root)
    ap.add_argument("--check", action="store_true")
    args = ap.parse_args()

    manifest_path = args.dir / "manifest.json"
    manifest = json.loads(manifest_path.read_text())
    stale = []
    for name, entry in manifest["files"].items():
        digest = sha256(args.dir / entry["path"])
        if digest != entry["sha256"]:
            stale.append(name)
            entry["sha256"] = digest
    if args.check:
        for name in stale:
            print(f"stale: {name}")
        return 1 if stale else 0
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(f"updated {len(stale)} entries")
    return 0


if __name__ == "__main__":
    sys.exit(main())
