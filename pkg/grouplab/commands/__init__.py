# Subcommands, one module each
from . import ascend, group, scan, train, verify

COMMANDS = (train, scan, ascend, verify, group)
