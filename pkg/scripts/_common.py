"""Small helpers shared by the experiment scripts."""

import argparse
import dataclasses
from pathlib import Path

from fastcq.cli import CsvWriter


def parse_config(cls, description):
    """Build an argparse parser from the fields of a dataclass and return an instance."""
    p = argparse.ArgumentParser(description=description)
    for f in dataclasses.fields(cls):
        default = f.default if f.default is not dataclasses.MISSING else f.default_factory()
        flag = "--" + f.name.replace("_", "-")
        if isinstance(default, bool):
            p.add_argument(flag, action=argparse.BooleanOptionalAction, default=default)
        elif isinstance(default, (list, tuple)):
            p.add_argument(flag, nargs="+", type=type(default[0]), default=list(default))
        else:
            p.add_argument(flag, type=type(default), default=default)
    return cls(**vars(p.parse_args()))


def open_csv(outdir, name):
    path = Path(outdir) / name
    path.parent.mkdir(parents=True, exist_ok=True)
    f = open(path, "w")
    return f, CsvWriter(f)
