from __future__ import annotations

import fnmatch
from typing import Any, Dict, Iterator

from tests.specs import random_specs, trivia

__all__ = ["iterator"]


def iterator(spec_filter: str = "*") -> Iterator[Dict[str, Any]]:
    """Iterator over named absorbing reward processes.

    `spec_filter` is a ":"-separated list of fnmatch patterns matched
    against both the bare and the module-qualified name.
    """

    def fetch_specs(module_name, module):
        ret = [
            ("%s.%s" % (module_name, name), (module, name))
            for name in module.__all__
            if any(
                (
                    fnmatch.fnmatch(name, one_filter)
                    or fnmatch.fnmatch("%s.%s" % (module_name, name), one_filter)
                )
                for one_filter in spec_filter.split(":")
            )
        ]
        return sorted(ret)

    specs = fetch_specs("trivia", trivia) + fetch_specs("random", random_specs)

    for module_name, (module, name) in specs:
        entry = getattr(module, name)()
        entry["name"] = module_name
        yield entry
