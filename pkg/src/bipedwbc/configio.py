"""Line-oriented config format with nested blocks, used by model, scenario and
terrain files.

Syntax::

    # comment
    version 1
    key value [value ...]
    block_name {
        key value
        nested { ... }
    }
    include other_file.cfg

Repeated keys and blocks accumulate in order. ``include`` splices the parsed
entries of another file (path relative to the including file) at that point.
"""

from __future__ import annotations

import os


class ConfigError(Exception):
    """Malformed config text or missing/ill-typed entries."""


class ConfigNode:
    """One block: ordered multimap of key -> scalar rows and key -> sub-blocks."""

    def __init__(self, name=""):
        self.name = name
        self.entries = []  # list of (key, payload); payload: list[str] | ConfigNode

    # -- construction -------------------------------------------------------

    def add_values(self, key, values):
        self.entries.append((key, list(values)))

    def add_block(self, key, node):
        self.entries.append((key, node))

    def merge(self, other):
        self.entries.extend(other.entries)

    # -- queries -------------------------------------------------------------

    def values(self, key):
        out = [p for k, p in self.entries if k == key and isinstance(p, list)]
        return out

    def blocks(self, key=None):
        return [p for k, p in self.entries
                if isinstance(p, ConfigNode) and (key is None or k == key)]

    def has(self, key):
        return any(k == key for k, _ in self.entries)

    def get(self, key, default=None, required=False):
        """Last scalar row for ``key`` as a single string token list."""
        rows = self.values(key)
        if not rows:
            if required:
                raise ConfigError(f"missing required key '{key}' in block '{self.name}'")
            return default
        return rows[-1]

    def get_str(self, key, default=None, required=False):
        row = self.get(key, None, required)
        if row is None:
            return default
        return " ".join(row)

    def get_float(self, key, default=None, required=False):
        row = self.get(key, None, required)
        if row is None:
            return default
        try:
            return float(row[0])
        except (ValueError, IndexError) as e:
            raise ConfigError(f"key '{key}': expected a number, got {row!r}") from e

    def get_int(self, key, default=None, required=False):
        v = self.get_float(key, None, required)
        if v is None:
            return default
        if v != int(v):
            raise ConfigError(f"key '{key}': expected an integer, got {v}")
        return int(v)

    def get_vec(self, key, n=None, default=None, required=False):
        row = self.get(key, None, required)
        if row is None:
            return default
        try:
            vec = [float(t) for t in row]
        except ValueError as e:
            raise ConfigError(f"key '{key}': expected numbers, got {row!r}") from e
        if n is not None and len(vec) != n:
            raise ConfigError(f"key '{key}': expected {n} numbers, got {len(vec)}")
        return vec

    def get_bool(self, key, default=None, required=False):
        row = self.get(key, None, required)
        if row is None:
            return default
        tok = row[0].lower()
        if tok in ("1", "true", "yes", "on"):
            return True
        if tok in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"key '{key}': expected a boolean, got {row!r}")

    def block(self, key, default_empty=True):
        found = self.blocks(key)
        if not found:
            if default_empty:
                return ConfigNode(key)
            raise ConfigError(f"missing required block '{key}'")
        return found[-1]

    # -- output --------------------------------------------------------------

    def dump(self, indent=0):
        pad = "    " * indent
        lines = []
        for k, p in self.entries:
            if isinstance(p, ConfigNode):
                lines.append(f"{pad}{k} {{")
                lines.append(p.dump(indent + 1))
                lines.append(f"{pad}}}")
            else:
                lines.append(pad + " ".join([k] + [str(t) for t in p]))
        return "\n".join(lines)


def _tokenize(line):
    hash_pos = line.find("#")
    if hash_pos >= 0:
        line = line[:hash_pos]
    return line.split()


def parse_config_text(text, base_dir=".", _depth=0):
    if _depth > 16:
        raise ConfigError("include nesting too deep (cycle?)")
    root = ConfigNode("<root>")
    stack = [root]
    for lineno, raw in enumerate(text.splitlines(), start=1):
        toks = _tokenize(raw)
        if not toks:
            continue
        if toks == ["}"]:
            if len(stack) == 1:
                raise ConfigError(f"line {lineno}: unmatched '}}'")
            stack.pop()
            continue
        if toks[-1] == "{":
            if len(toks) != 2:
                raise ConfigError(f"line {lineno}: block header must be 'name {{'")
            node = ConfigNode(toks[0])
            stack[-1].add_block(toks[0], node)
            stack.append(node)
            continue
        if toks[0] == "include":
            if len(toks) != 2:
                raise ConfigError(f"line {lineno}: include takes one path")
            if len(stack) != 1:
                raise ConfigError(f"line {lineno}: include only allowed at top level")
            path = os.path.join(base_dir, toks[1])
            stack[-1].merge(load_config(path, _depth=_depth + 1))
            continue
        stack[-1].add_values(toks[0], toks[1:])
    if len(stack) != 1:
        raise ConfigError(f"unclosed block '{stack[-1].name}'")
    return root


def load_config(path, _depth=0):
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    return parse_config_text(text, base_dir=os.path.dirname(os.path.abspath(path)),
                             _depth=_depth)
