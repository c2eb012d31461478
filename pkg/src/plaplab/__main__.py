"""Allow ``python -m plaplab`` to behave like the installed script."""

from .cli import console_entry

console_entry()
