"""Configuration: defaults, environment, INI config files and flag overrides"""

import ast
import configparser
import os
from typing import Mapping, Optional

# Defaults. Anything here can be overridden (in increasing precedence) by the
# environment, by a config file and by command line flags.
DFLT_CONFIG = {
    'seed': 0,
    'jobs': 1,
    'log_level': 'WARNING',
    'max_cells': 50_000_000,
    'max_generation': 10,
    'max_tiles': 5_000_000,
    'max_squares': 2_000_000,
    'generation': 4,
    'level': 0,
    'window': (-1.0, 1.0, -1.0, 1.0),
    'kind': 'bm',
    'steps': 100_000,
    'dt': None,
    'eps': None,
    'h': 1,
    'depth': 2,
    'j_max': 8,
    'eta': 0.05,
    'r': 0.25,
    'trials': 1000,
}

ENV_VARS = {
    'seed': 'FRONTIERLAB_SEED',
    'max_cells': 'FRONTIERLAB_MAX_CELLS',
    'max_generation': 'FRONTIERLAB_MAX_GENERATION',
}

MAIN_SECTION = 'flab'


def _literal(value: str):
    """
    Parse a config value as a python literal, falling back to the raw string

    >>> _literal('3'), _literal('0.5'), _literal('(1, 2)'), _literal('bm')
    (3, 0.5, (1, 2), 'bm')
    >>> _literal('true'), _literal('None')
    (True, None)
    """
    lowered = value.strip().lower()
    if lowered in ('true', 'yes', 'on'):
        return True
    if lowered in ('false', 'no', 'off'):
        return False
    try:
        return ast.literal_eval(value.strip())
    except (ValueError, SyntaxError):
        return value.strip()


def env_config(environ: Optional[Mapping[str, str]] = None) -> dict:
    """The config keys set through ``FRONTIERLAB_*`` environment variables"""
    environ = os.environ if environ is None else environ
    return {
        key: _literal(environ[var]) for key, var in ENV_VARS.items() if var in environ
    }


def read_config_file(filepath: str, section: Optional[str] = None) -> dict:
    """
    Read the ``[flab]`` section of an INI config file, then overlay
    ``section`` (e.g. ``'frontier'`` or ``'experiment:frontier-dim'``) if given.
    """
    parser = configparser.ConfigParser()
    with open(filepath) as fp:
        parser.read_file(fp)
    cfg = {}
    for name in (MAIN_SECTION, section):
        if name is not None and parser.has_section(name):
            cfg.update({k: _literal(v) for k, v in parser.items(name)})
    return cfg


def resolve_config(
    flags: Optional[Mapping] = None,
    config_filepath: Optional[str] = None,
    section: Optional[str] = None,
    environ: Optional[Mapping[str, str]] = None,
    defaults: Optional[Mapping] = None,
) -> dict:
    """
    Merge defaults, environment, config file and flags (flags win).
    Flags that are ``None`` are treated as not given. ``defaults`` overlays
    ``DFLT_CONFIG`` (per command or per experiment defaults).

    >>> cfg = resolve_config({'seed': 5, 'eta': None}, environ={'FRONTIERLAB_SEED': '9'})
    >>> cfg['seed'], cfg['eta']
    (5, 0.05)
    >>> resolve_config(environ={'FRONTIERLAB_SEED': '9'})['seed']
    9
    """
    cfg = dict(DFLT_CONFIG)
    cfg.update(defaults or {})
    cfg.update(env_config(environ))
    if config_filepath is not None:
        cfg.update(read_config_file(config_filepath, section))
    if flags:
        cfg.update({k: v for k, v in flags.items() if v is not None})
    return cfg
