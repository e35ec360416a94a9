"""Config-language front end: parsing, anchor resolution, serialization.

Experiment files use a small indentation-based language (a strict YAML
subset).  Supported constructs:

* block mappings (``key: value``, nesting by indentation)
* block sequences (``- item``), including compact ``- key: value`` items;
  a sequence may sit at the same indent as its parent key
* flow mappings ``{key: value, ...}`` on a single line, ``{}`` when empty
* ``[]`` for an empty sequence (the only flow-sequence form accepted)
* scalars: ints, floats, booleans (``true``/``True``/...), ``null``/``~``,
  plain and quoted strings; the atom type is inferred at parse time
* ``# comment`` to end of line (outside quotes)
* ``!ComponentTag`` on any value; ``&anchor`` / ``*alias`` textual reuse
* several top-level experiment keys per file; ``---`` separates concatenated
  documents, which are merged into a single root mapping

Rejected on purpose: tabs in indentation, duplicate keys, multi-line
strings, merge keys, non-empty flow sequences.  ``serialize_config`` emits
canonical 2-space indentation and its output reparses to a tree that is
``deep_equal`` to the input.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any, Iterator, Optional

Loc = tuple[int, int]

SCALAR = "scalar"
SEQUENCE = "sequence"
MAPPING = "mapping"
ALIAS = "alias"


class ParseError(Exception):
    """Config text that does not conform to the documented subset."""

    def __init__(self, message: str, loc: Loc):
        super().__init__(f"line {loc[0]}, col {loc[1]}: {message}")
        self.message = message
        self.loc = loc


@dataclass
class ConfigNode:
    """One node of the parsed config tree.

    ``children`` holds ``(key, node)`` pairs for mappings and bare nodes for
    sequences.  ``value`` carries the inferred atom for scalars and the
    target name for (unresolved) aliases.  Every node records the 1-based
    ``(line, col)`` where it started.
    """

    kind: str
    loc: Loc = (0, 0)
    tag: Optional[str] = None
    anchor: Optional[str] = None
    value: Any = None
    children: list = field(default_factory=list)
    key_locs: dict = field(default_factory=dict)

    # -- constructors used by the resolver/dumper and by tests ------------

    @staticmethod
    def scalar(value: Any, tag: str | None = None, loc: Loc = (0, 0)) -> "ConfigNode":
        return ConfigNode(SCALAR, loc=loc, tag=tag, value=value)

    @staticmethod
    def mapping(pairs=(), tag: str | None = None, loc: Loc = (0, 0)) -> "ConfigNode":
        return ConfigNode(MAPPING, loc=loc, tag=tag, children=list(pairs))

    @staticmethod
    def sequence(items=(), tag: str | None = None, loc: Loc = (0, 0)) -> "ConfigNode":
        return ConfigNode(SEQUENCE, loc=loc, tag=tag, children=list(items))

    # -- accessors ---------------------------------------------------------

    def keys(self) -> list[str]:
        assert self.kind == MAPPING
        return [k for k, _ in self.children]

    def get(self, key: str) -> Optional["ConfigNode"]:
        assert self.kind == MAPPING
        for k, node in self.children:
            if k == key:
                return node
        return None

    def set(self, key: str, node: "ConfigNode") -> None:
        assert self.kind == MAPPING
        for i, (k, _) in enumerate(self.children):
            if k == key:
                self.children[i] = (key, node)
                return
        self.children.append((key, node))

    def copy(self, *, loc: Loc | None = None, drop_anchor: bool = False) -> "ConfigNode":
        """Deep copy; optionally force every loc and strip anchors."""
        new_loc = loc if loc is not None else self.loc
        if self.kind == MAPPING:
            kids = [(k, n.copy(loc=loc, drop_anchor=drop_anchor)) for k, n in self.children]
        elif self.kind == SEQUENCE:
            kids = [n.copy(loc=loc, drop_anchor=drop_anchor) for n in self.children]
        else:
            kids = []
        return ConfigNode(
            self.kind,
            loc=new_loc,
            tag=self.tag,
            anchor=None if drop_anchor else self.anchor,
            value=self.value,
            children=kids,
            key_locs={} if loc is not None else dict(self.key_locs),
        )


def deep_equal(a: ConfigNode, b: ConfigNode) -> bool:
    """Structural equality over kind, tag, atom value and children.

    Source locations and anchor names are presentation metadata and are
    ignored; atom comparison is type-strict (``1`` != ``1.0`` != ``"1"``).
    """
    if a.kind != b.kind or a.tag != b.tag:
        return False
    if a.kind == SCALAR:
        return type(a.value) is type(b.value) and a.value == b.value
    if a.kind == ALIAS:
        return a.value == b.value
    if a.kind == MAPPING:
        if a.keys() != b.keys():
            return False
        return all(deep_equal(x, y) for (_, x), (_, y) in zip(a.children, b.children))
    if len(a.children) != len(b.children):
        return False
    return all(deep_equal(x, y) for x, y in zip(a.children, b.children))


def iter_nodes(root: ConfigNode) -> Iterator[ConfigNode]:
    """Yield nodes in document order (pre-order)."""
    yield root
    if root.kind == MAPPING:
        for _, child in root.children:
            yield from iter_nodes(child)
    elif root.kind == SEQUENCE:
        for child in root.children:
            yield from iter_nodes(child)


# ---------------------------------------------------------------------------
# scalar atoms
# ---------------------------------------------------------------------------

_INT_RE = re.compile(r"^[+-]?\d+$")
_FLOAT_RE = re.compile(r"^[+-]?(\d+\.\d*|\.\d+|\d+)([eE][+-]?\d+)?$")
_TAG_RE = re.compile(r"^!([A-Za-z_][A-Za-z0-9_]*)(?=\s|$)")
_ANCHOR_RE = re.compile(r"^&([A-Za-z_][A-Za-z0-9_-]*)(?=\s|$)")
_ALIAS_RE = re.compile(r"^\*([A-Za-z_][A-Za-z0-9_-]*)$")


def infer_atom(text: str) -> Any:
    """Deterministic atom inference for a plain (unquoted) scalar."""
    if text in ("null", "~"):
        return None
    if text in ("true", "True"):
        return True
    if text in ("false", "False"):
        return False
    if _INT_RE.match(text):
        return int(text)
    if _FLOAT_RE.match(text):
        return float(text)
    return text


# ---------------------------------------------------------------------------
# lexing helpers
# ---------------------------------------------------------------------------


@dataclass
class _Line:
    number: int      # 1-based
    indent: int      # count of leading spaces
    text: str        # content with indent and comment stripped


def _strip_comment(raw: str) -> str:
    """Remove a trailing ``# ...`` comment, honouring quotes.

    A ``#`` only opens a comment at line start or after whitespace.
    """
    quote = None
    i = 0
    while i < len(raw):
        ch = raw[i]
        if quote:
            if ch == "\\" and quote == '"':
                i += 2
                continue
            if ch == quote:
                quote = None
        elif ch in "\"'":
            quote = ch
        elif ch == "#" and (i == 0 or raw[i - 1] in " \t"):
            return raw[:i]
        i += 1
    return raw


def _lex(text: str) -> list[_Line]:
    lines: list[_Line] = []
    for number, raw in enumerate(text.splitlines(), start=1):
        raw = raw.rstrip("\r")
        content = _strip_comment(raw).rstrip()
        if not content.strip():
            continue
        indent = len(content) - len(content.lstrip(" \t"))
        if "\t" in content[:indent]:
            raise ParseError("tab character in indentation", (number, content.index("\t") + 1))
        lines.append(_Line(number, indent, content[indent:]))
    return lines


def _unquote(text: str, loc: Loc) -> str:
    quote = text[0]
    body = text[1:-1]
    if quote == "'":
        return body
    out = []
    i = 0
    while i < len(body):
        ch = body[i]
        if ch == "\\":
            if i + 1 >= len(body) or body[i + 1] not in '\\"':
                raise ParseError("unsupported escape in string", loc)
            out.append(body[i + 1])
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def _find_quoted_end(text: str, start: int, loc: Loc) -> int:
    """Index just past the closing quote of a string starting at ``start``."""
    quote = text[start]
    i = start + 1
    while i < len(text):
        ch = text[i]
        if ch == "\\" and quote == '"':
            i += 2
            continue
        if ch == quote:
            return i + 1
        i += 1
    raise ParseError("unterminated quoted string", loc)


def _split_key(text: str, line: _Line) -> Optional[tuple[str, int, int]]:
    """Split ``key: rest`` -> (key, value_offset, colon_offset); None if no key.

    The colon must sit outside quotes and be followed by a space or line end.
    """
    i = 0
    if text and text[0] in "\"'":
        i = _find_quoted_end(text, 0, (line.number, line.indent + 1))
    while i < len(text):
        ch = text[i]
        if ch == ":" and (i + 1 == len(text) or text[i + 1] == " "):
            key = text[:i].strip()
            j = i + 1
            while j < len(text) and text[j] == " ":
                j += 1
            return key, j, i
        i += 1
    return None


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


class _Parser:
    def __init__(self, lines: list[_Line]):
        self.lines = lines
        self.pos = 0

    def peek(self) -> Optional[_Line]:
        return self.lines[self.pos] if self.pos < len(self.lines) else None

    def next(self) -> _Line:
        line = self.lines[self.pos]
        self.pos += 1
        return line

    # -- prefixes (tags / anchors) ----------------------------------------

    def _take_prefixes(self, text: str, line: _Line, col: int):
        tag = anchor = None
        while True:
            m = _TAG_RE.match(text)
            if m:
                if tag is not None:
                    raise ParseError("duplicate tag", (line.number, col))
                tag = m.group(1)
            else:
                m = _ANCHOR_RE.match(text)
                if m:
                    if anchor is not None:
                        raise ParseError("duplicate anchor", (line.number, col))
                    anchor = m.group(1)
            if not m:
                return tag, anchor, text, col
            consumed = m.end()
            text = text[consumed:]
            col += consumed
            stripped = text.lstrip(" ")
            col += len(text) - len(stripped)
            text = stripped

    # -- inline values -----------------------------------------------------

    def _parse_flow_mapping(self, text: str, line: _Line, col: int) -> tuple[ConfigNode, int]:
        """Parse ``{...}`` starting at text[0] == '{'; returns (node, n_consumed)."""
        node = ConfigNode.mapping(loc=(line.number, col))
        i = 1
        seen: set[str] = set()
        while True:
            while i < len(text) and text[i] == " ":
                i += 1
            if i >= len(text):
                raise ParseError("unterminated flow mapping", (line.number, col))
            if text[i] == "}":
                return node, i + 1
            if node.children:
                if text[i] != ",":
                    raise ParseError("expected ',' or '}' in flow mapping", (line.number, col + i))
                i += 1
                while i < len(text) and text[i] == " ":
                    i += 1
            split = _split_key(text[i:], line)
            if split is None:
                raise ParseError("expected 'key: value' in flow mapping", (line.number, col + i))
            key, off, _ = split
            if not key:
                raise ParseError("empty key in flow mapping", (line.number, col + i))
            if key in seen:
                raise ParseError(f"duplicate key '{key}'", (line.number, col + i))
            seen.add(key)
            key_loc = (line.number, col + i)
            i += off
            child, used = self._parse_flow_value(text, line, col, i)
            i = used
            node.children.append((key, child))
            node.key_locs[key] = key_loc

    def _parse_flow_value(self, text: str, line: _Line, col: int, i: int) -> tuple[ConfigNode, int]:
        tag, anchor, rest, vcol = self._take_prefixes(text[i:], line, col + i)
        i = vcol - col
        loc = (line.number, col + i)
        if rest.startswith("{"):
            child, used = self._parse_flow_mapping(text[i:], line, col + i)
            child.tag = tag
            child.anchor = anchor
            return child, i + used
        # plain or quoted scalar ending at ',' or '}'
        if rest[:1] in "\"'":
            end = _find_quoted_end(text, i, loc)
            value = _unquote(text[i:end], loc)
            node = ConfigNode.scalar(value, tag=tag, loc=loc)
            node.anchor = anchor
            return node, end
        j = i
        while j < len(text) and text[j] not in ",}":
            j += 1
        if j >= len(text):
            raise ParseError("unterminated flow mapping", (line.number, col))
        raw = text[i:j].strip()
        if not raw and tag is None and anchor is None:
            raise ParseError("empty value in flow mapping", loc)
        node = self._atom_node(raw, tag, anchor, loc)
        return node, j

    def _atom_node(self, raw: str, tag, anchor, loc: Loc) -> ConfigNode:
        m = _ALIAS_RE.match(raw)
        if m:
            if tag or anchor:
                raise ParseError("alias cannot carry a tag or anchor", loc)
            return ConfigNode(ALIAS, loc=loc, value=m.group(1))
        if raw == "":
            node = ConfigNode.scalar(None, tag=tag, loc=loc)
        elif raw == "[]":
            node = ConfigNode.sequence(tag=tag, loc=loc)
        else:
            node = ConfigNode.scalar(infer_atom(raw), tag=tag, loc=loc)
        node.anchor = anchor
        return node

    def _parse_inline(self, rest: str, line: _Line, col: int, tag, anchor) -> ConfigNode:
        """A non-empty value on the same line as its key/dash."""
        loc = (line.number, col)
        if rest.startswith("{"):
            node, used = self._parse_flow_mapping(rest, line, col)
            if rest[used:].strip():
                raise ParseError("trailing content after flow mapping", (line.number, col + used))
            node.tag = tag
            node.anchor = anchor
            return node
        if rest[:1] in "\"'":
            end = _find_quoted_end(rest, 0, loc)
            if rest[end:].strip():
                raise ParseError("trailing content after quoted string", (line.number, col + end))
            node = ConfigNode.scalar(_unquote(rest[:end], loc), tag=tag, loc=loc)
            node.anchor = anchor
            return node
        return self._atom_node(rest.strip(), tag, anchor, loc)

    # -- block values -------------------------------------------------------

    def _parse_block_value(self, parent_indent: int, line: _Line, col: int,
                           tag, anchor, allow_same_indent_seq: bool) -> ConfigNode:
        """Value introduced by ``key:`` or ``-`` with nothing after it."""
        nxt = self.peek()
        if nxt is not None:
            if nxt.indent > parent_indent:
                node = self._parse_block(nxt.indent)
                node.tag = tag
                node.anchor = anchor
                return node
            if (allow_same_indent_seq and nxt.indent == parent_indent
                    and _is_dash(nxt.text)):
                node = self._parse_sequence(nxt.indent)
                node.tag = tag
                node.anchor = anchor
                return node
        node = ConfigNode.scalar(None, tag=tag, loc=(line.number, col))
        node.anchor = anchor
        return node

    def _parse_block(self, indent: int) -> ConfigNode:
        line = self.peek()
        assert line is not None
        if _is_dash(line.text):
            return self._parse_sequence(indent)
        return self._parse_mapping(indent)

    def _parse_mapping(self, indent: int, first_inline: tuple[_Line, str, int] | None = None) -> ConfigNode:
        """Block mapping whose keys sit at exactly ``indent``.

        ``first_inline`` injects the remainder of a compact ``- key: ...``
        sequence item as the first entry (at virtual column ``indent``).
        """
        start = first_inline[0] if first_inline else self.peek()
        assert start is not None
        node = ConfigNode.mapping(loc=(start.number, indent + 1))
        while True:
            if first_inline is not None:
                line, text, col = first_inline
                first_inline = None
            else:
                nxt = self.peek()
                if nxt is None or nxt.indent < indent:
                    break
                if nxt.indent > indent:
                    raise ParseError("inconsistent indentation", (nxt.number, nxt.indent + 1))
                if _is_dash(nxt.text):
                    break
                line = self.next()
                text, col = line.text, line.indent
            split = _split_key(text, line)
            if split is None:
                raise ParseError("expected 'key: value'", (line.number, col + 1))
            key, off, _colon = split
            if not key:
                raise ParseError("empty mapping key", (line.number, col + 1))
            if key[0] in "\"'":
                key = _unquote(key, (line.number, col + 1))
            if node.get(key) is not None:
                raise ParseError(f"duplicate key '{key}'", (line.number, col + 1))
            key_loc = (line.number, col + 1)
            rest = text[off:]
            vcol = col + off
            tag, anchor, rest, vcol = self._take_prefixes(rest, line, vcol)
            if rest:
                child = self._parse_inline(rest, line, vcol + 1, tag, anchor)
            else:
                child = self._parse_block_value(indent, line, vcol + 1, tag, anchor,
                                                allow_same_indent_seq=True)
            node.children.append((key, child))
            node.key_locs[key] = key_loc
        return node

    def _parse_sequence(self, indent: int) -> ConfigNode:
        start = self.peek()
        assert start is not None
        node = ConfigNode.sequence(loc=(start.number, indent + 1))
        while True:
            nxt = self.peek()
            if nxt is None or nxt.indent < indent or not _is_dash(nxt.text):
                break
            if nxt.indent > indent:
                raise ParseError("inconsistent indentation", (nxt.number, nxt.indent + 1))
            line = self.next()
            rest = line.text[1:]
            pad = len(rest) - len(rest.lstrip(" "))
            rest = rest.lstrip(" ")
            col = line.indent + 1 + pad  # 0-based col of content after '- '
            tag, anchor, rest, col = self._take_prefixes(rest, line, col)
            if not rest:
                child = self._parse_block_value(line.indent, line, col + 1, tag, anchor,
                                                allow_same_indent_seq=False)
            elif _split_key(rest, line) is not None and rest[0] not in "\"'{":
                # compact "- key: value" item: a mapping at the content column
                child = self._parse_mapping(col, first_inline=(line, rest, col))
                child.tag = tag
                child.anchor = anchor
            else:
                child = self._parse_inline(rest, line, col + 1, tag, anchor)
            node.children.append(child)
        return node


def _is_dash(text: str) -> bool:
    return text == "-" or text.startswith("- ")


def parse_config(text: str) -> ConfigNode:
    """Parse config text into a ConfigNode tree.

    The root is always a mapping of top-level entries; ``---`` document
    separators concatenate into that single root mapping.
    """
    lines = _lex(text)
    root = ConfigNode.mapping(loc=(1, 1))
    chunk: list[_Line] = []
    chunks: list[list[_Line]] = []
    for line in lines:
        if line.indent == 0 and line.text == "---":
            chunks.append(chunk)
            chunk = []
        else:
            chunk.append(line)
    chunks.append(chunk)
    for chunk in chunks:
        if not chunk:
            continue
        if chunk[0].indent != 0:
            raise ParseError("top-level content must start at column 1",
                             (chunk[0].number, chunk[0].indent + 1))
        parser = _Parser(chunk)
        if _is_dash(chunk[0].text):
            raise ParseError("top level must be a mapping", (chunk[0].number, 1))
        doc = parser._parse_mapping(0)
        leftover = parser.peek()
        if leftover is not None:
            raise ParseError("content after end of document", (leftover.number, leftover.indent + 1))
        for key, child in doc.children:
            if root.get(key) is not None:
                raise ParseError(f"duplicate key '{key}'", doc.key_locs[key])
            root.children.append((key, child))
            root.key_locs[key] = doc.key_locs[key]
    return root


# ---------------------------------------------------------------------------
# anchors
# ---------------------------------------------------------------------------


def resolve_anchors(root: ConfigNode) -> ConfigNode:
    """Replace every alias with a deep copy of its anchored subtree.

    Anchors are file-scoped and must be defined before use.  Copies carry
    the alias's location (keeping locations nondecreasing in document
    order) and drop anchor metadata; the anchor definitions themselves keep
    theirs.  Returns a new tree.
    """
    table: dict[str, ConfigNode] = {}

    def walk(node: ConfigNode) -> ConfigNode:
        if node.kind == ALIAS:
            target = table.get(node.value)
            if target is None:
                raise ParseError(f"undefined anchor '{node.value}'", node.loc)
            return target.copy(loc=node.loc, drop_anchor=True)
        if node.kind == MAPPING:
            out = ConfigNode(MAPPING, loc=node.loc, tag=node.tag, anchor=node.anchor,
                             key_locs=dict(node.key_locs))
            out.children = [(k, walk(c)) for k, c in node.children]
        elif node.kind == SEQUENCE:
            out = ConfigNode(SEQUENCE, loc=node.loc, tag=node.tag, anchor=node.anchor)
            out.children = [walk(c) for c in node.children]
        else:
            out = node.copy()
        if out.anchor:
            table[out.anchor] = out
        return out

    return walk(root)


# ---------------------------------------------------------------------------
# serializer
# ---------------------------------------------------------------------------

_PLAIN_SAFE_FIRST = set("!&*{}[]#\"'%@`|>,")


def _needs_quotes(text: str, in_flow: bool) -> bool:
    if text == "" or text != text.strip():
        return True
    if not isinstance(infer_atom(text), str):
        return True
    if text[0] in _PLAIN_SAFE_FIRST or text == "-" or text.startswith("- "):
        return True
    if ": " in text or text.endswith(":") or " #" in text:
        return True
    if in_flow and any(ch in text for ch in ",{}"):
        return True
    return False


def _emit_atom(value: Any, in_flow: bool) -> str:
    if value is None:
        return "null"
    if value is True:
        return "true"
    if value is False:
        return "false"
    if isinstance(value, int):
        return repr(value)
    if isinstance(value, float):
        return repr(value)
    text = str(value)
    if "\n" in text:
        raise ValueError("multi-line strings cannot be serialized")
    if not _needs_quotes(text, in_flow):
        return text
    if '"' in text or "\\" in text:
        body = text.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{body}"'
    return f'"{text}"'


def _tag_prefix(node: ConfigNode) -> str:
    return f"!{node.tag} " if node.tag else ""


def _flow_eligible(node: ConfigNode) -> bool:
    if node.kind != MAPPING:
        return False
    if not node.children:
        return True
    if len(node.children) > 2:
        return False
    return all(c.kind == SCALAR and c.tag is None for _, c in node.children)


def _emit_key(key: str) -> str:
    if (key == "" or key != key.strip() or ":" in key or "#" in key
            or key[0] in _PLAIN_SAFE_FIRST or key.startswith("- ") or key == "-"):
        if '"' in key or "\\" in key:
            return f'"{key.replace(chr(92), chr(92) * 2).replace(chr(34), chr(92) + chr(34))}"'
        return f'"{key}"'
    return key


def _emit_flow(node: ConfigNode) -> str:
    if not node.children:
        return "{}"
    inner = ", ".join(f"{_emit_key(k)}: {_emit_atom(c.value, True)}"
                      for k, c in node.children)
    return "{" + inner + "}"


def _emit_block(node: ConfigNode, indent: int, out: list[str]) -> None:
    pad = " " * indent
    if node.kind == MAPPING:
        for key, child in node.children:
            head = f"{pad}{_emit_key(key)}:"
            _emit_value(child, head, indent, out)
    else:
        for child in node.children:
            _emit_value(child, f"{pad}-", indent, out)


def _emit_value(node: ConfigNode, head: str, indent: int, out: list[str]) -> None:
    if node.kind == SCALAR:
        out.append(f"{head} {_tag_prefix(node)}{_emit_atom(node.value, False)}")
    elif node.kind == ALIAS:
        raise ValueError("cannot serialize a tree with unresolved aliases")
    elif node.kind == MAPPING:
        if _flow_eligible(node):
            out.append(f"{head} {_tag_prefix(node)}{_emit_flow(node)}")
        else:
            if node.tag:
                out.append(f"{head} !{node.tag}")
            else:
                out.append(head)
            _emit_block(node, indent + 2, out)
    else:  # sequence
        if not node.children:
            out.append(f"{head} {_tag_prefix(node)}[]")
        else:
            if node.tag:
                out.append(f"{head} !{node.tag}")
            else:
                out.append(head)
            _emit_block(node, indent + 2, out)


def serialize_config(root: ConfigNode) -> str:
    """Serialize a tree (no unresolved aliases) back to config text."""
    if root.kind == MAPPING and not root.children:
        return "{}\n"
    if root.kind != MAPPING:
        raise ValueError("document root must be a mapping")
    out: list[str] = []
    _emit_block(root, 0, out)
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# path navigation (shared by resolver and overwrites)
# ---------------------------------------------------------------------------


def node_at_path(root: ConfigNode, path: str) -> Optional[ConfigNode]:
    """Follow a dotted path (``a.b.0.c``); returns None if it dangles."""
    node = root
    if path == "":
        return node
    for seg in path.split("."):
        if node.kind == MAPPING:
            node = node.get(seg)
            if node is None:
                return None
        elif node.kind == SEQUENCE:
            if not seg.isdigit() or int(seg) >= len(node.children):
                return None
            node = node.children[int(seg)]
        else:
            return None
    return node
