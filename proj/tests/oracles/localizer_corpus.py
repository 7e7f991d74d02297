"""Builds the localizer corpus and labels it by executing every snippet.

Each base program is clean. Its injected twin renames one helper call to an
undefined name. The oracle rewrites every `name(...)` call into a probe that
resolves `name` in its own scope, runs the module, and on NameError binds a
permissive stub globally and runs again, until execution no longer fails on
a missing name.

Usage: python3 localizer_corpus.py > ../data/localizer_corpus.json
"""
import ast
import json
import sys

BASES = [
    ("word_freq", """
import collections

def word_freq(text):
    counts = collections.Counter(text.lower().split())
    return sorted(counts.items())

result = word_freq("b a b")
""", "sorted", "sort_pairs"),
    ("flatten", """
def flatten(rows):
    out = []
    for row in rows:
        out.extend(row)
    return out

def total(rows):
    return sum(flatten(rows))

value = total([[1, 2], [3]])
""", "flatten", "flatten_rows"),
    ("parse_pairs", """
def parse_pairs(text):
    pairs = {}
    for item in text.split(","):
        key, _, val = item.partition("=")
        pairs[key.strip()] = int(val)
    return pairs

parsed = parse_pairs("a=1, b=2")
""", "int", "to_integer"),
    ("median", """
def median(values):
    ordered = sorted(values)
    mid = len(ordered) // 2
    if len(ordered) % 2:
        return ordered[mid]
    return (ordered[mid - 1] + ordered[mid]) / 2

m = median([3, 1, 2, 4])
""", "sorted", "sort_values"),
    ("class_stack", """
class Stack:
    def __init__(self):
        self.items = []

    def push(self, item):
        self.items.append(item)

    def pop(self):
        return self.items.pop()

def reverse(seq):
    stack = Stack()
    for item in seq:
        stack.push(item)
    return [stack.pop() for _ in seq]

rev = reverse([1, 2, 3])
""", "Stack", "make_stack"),
    ("with_reader", """
import io

def read_lines(text):
    with io.StringIO(text) as handle:
        return [line.rstrip() for line in handle]

lines = read_lines("a\\nb\\n")
""", "read_lines", "load_lines"),
    ("lambda_sort", """
def by_length(words):
    key = lambda w: (len(w), w)
    return sorted(words, key=key)

ordered = by_length(["ccc", "a", "bb"])
""", "sorted", "order_by"),
    ("nested_scope", """
def make_counter():
    count = 0
    def step():
        nonlocal count
        count += 1
        return count
    return step

counter = make_counter()
counter()
last = counter()
""", "make_counter", "build_counter"),
    ("global_state", """
REGISTRY = {}

def register(name, value):
    global REGISTRY
    REGISTRY[name] = value
    return len(REGISTRY)

def lookup(name):
    return REGISTRY.get(name)

register("x", 1)
found = lookup("x")
""", "register", "register_value"),
    ("walrus_filter", """
def long_words(words):
    return [clean for word in words if len(clean := word.strip()) > 3]

kept = long_words([" alpha ", "be", "gamma"])
""", "len", "length_of"),
    ("except_alias", """
def safe_div(a, b):
    try:
        return a / b
    except ZeroDivisionError as exc:
        return str(exc)

q = safe_div(1, 0)
""", "str", "describe_error"),
    ("from_import", """
from math import sqrt as root
from functools import reduce

def norm(vec):
    return root(reduce(lambda acc, x: acc + x * x, vec, 0))

n = norm([3, 4])
""", "root", "square_root"),
    ("dict_comp", """
def invert(mapping):
    return {value: key for key, value in mapping.items()}

def check(mapping):
    inverted = invert(mapping)
    return all(mapping[inverted[v]] == v for v in inverted)

ok = check({"a": 1, "b": 2})
""", "invert", "invert_mapping"),
    ("generator", """
def chunks(seq, size):
    for start in range(0, len(seq), size):
        yield seq[start:start + size]

def chunk_sums(seq):
    return [sum(part) for part in chunks(seq, 2)]

sums = chunk_sums([1, 2, 3, 4, 5])
""", "chunks", "split_chunks"),
    ("star_unpack", """
def head_tail(seq):
    first, *rest = seq
    return first, list(rest)

def describe(seq):
    head, tail = head_tail(seq)
    return "%s+%d" % (head, len(tail))

text = describe([9, 8, 7])
""", "head_tail", "split_head"),
    ("recursion", """
def fib(n):
    if n < 2:
        return n
    return fib(n - 1) + fib(n - 2)

f10 = fib(10)
""", "fib", "fibonacci"),
    ("class_method", """
class Point:
    def __init__(self, x, y):
        self.x = x
        self.y = y

    @classmethod
    def origin(cls):
        return cls(0, 0)

    def dist2(self, other):
        return (self.x - other.x) ** 2 + (self.y - other.y) ** 2

d = Point(3, 4).dist2(Point.origin())
""", "Point", "make_point"),
    ("for_else", """
def find_index(seq, target):
    for index, item in enumerate(seq):
        if item == target:
            break
    else:
        return -1
    return index

idx = find_index("abc", "c")
""", "enumerate", "number_items"),
    ("default_args", """
def greet(name, greeting=None):
    greeting = greeting or default_greeting()
    return greeting + ", " + name

def default_greeting():
    return "Hello"

msg = greet("Ada")
""", "default_greeting", "fallback_greeting"),
    ("set_ops", """
import itertools

def pair_sums(values):
    return {a + b for a, b in itertools.combinations(values, 2)}

def distinct_count(values):
    return len(pair_sums(values))

count = distinct_count([1, 2, 3, 4])
""", "pair_sums", "compute_pair_sums"),
]

STUB_NAMES = set()


class Anything:
    """Permissive stand-in returned by stubs so execution can continue."""

    def __call__(self, *args, **kwargs):
        return Anything()

    def __getattr__(self, name):
        return Anything()

    def __iter__(self):
        return iter(())

    def __bool__(self):
        return False

    def __len__(self):
        return 0

    def __int__(self):
        return 0

    def __index__(self):
        return 0

    def __float__(self):
        return 0.0

    def __str__(self):
        return ""

    def __getitem__(self, key):
        return Anything()

    def __eq__(self, other):
        return False

    def __hash__(self):
        return 0

    def _binary(self, other):
        return Anything()

    __add__ = __radd__ = __sub__ = __rsub__ = __mul__ = __rmul__ = _binary
    __truediv__ = __rtruediv__ = __floordiv__ = __rfloordiv__ = __mod__ = __rmod__ = _binary
    __pow__ = __rpow__ = __lt__ = __le__ = __gt__ = __ge__ = _binary


class Probe(ast.NodeTransformer):
    """Rewrites `name(args)` into `__probe__('name', lambda: name)(args)`."""

    def visit_Call(self, node):
        self.generic_visit(node)
        if isinstance(node.func, ast.Name):
            thunk = ast.Lambda(
                args=ast.arguments(posonlyargs=[], args=[], vararg=None, kwonlyargs=[], kw_defaults=[],
                                   kwarg=None, defaults=[]),
                body=ast.Name(id=node.func.id, ctx=ast.Load()))
            node.func = ast.Call(func=ast.Name(id="__probe__", ctx=ast.Load()),
                                 args=[ast.Constant(node.func.id), thunk], keywords=[])
        return node


def execute(source):
    """Returns (names raising NameError at a call, names resolved at a call)."""
    tree = ast.fix_missing_locations(Probe().visit(ast.parse(source)))
    code = compile(tree, "<snippet>", "exec")
    missing, resolved = [], set()
    stubs = {}
    for _ in range(50):
        failed = []

        def probe(name, thunk):
            try:
                value = thunk()
            except NameError:
                failed.append(name)
                raise
            resolved.add(name)
            return value

        scope = {"__name__": "__snippet__", "__probe__": probe}
        scope.update(stubs)
        try:
            exec(code, scope)
        except NameError:
            if not failed:
                raise
        except Exception:
            pass
        if not failed:
            break
        name = failed[-1]
        if name in stubs:
            raise RuntimeError("stub did not bind " + name)
        missing.append(name)
        stubs[name] = Anything()
    return missing, sorted(resolved - set(missing))


def inject(source, original, replacement):
    """Renames the first call of `original` (by position) to `replacement`."""
    tree = ast.parse(source)
    calls = sorted(
        (n for n in ast.walk(tree) if isinstance(n, ast.Call) and isinstance(n.func, ast.Name) and n.func.id == original),
        key=lambda n: (n.func.lineno, n.func.col_offset))
    target = calls[0].func
    lines = source.split("\n")
    line = lines[target.lineno - 1]
    lines[target.lineno - 1] = line[:target.col_offset] + replacement + line[target.end_col_offset:]
    return "\n".join(lines)


def main():
    cases = []
    for name, body, original, replacement in BASES:
        clean = body.lstrip("\n")
        for injected, source in ((False, clean), (True, inject(clean, original, replacement))):
            missing, resolved = execute(source)
            cases.append({
                "id": name + ("_injected" if injected else "_clean"),
                "injected": injected,
                "source": source,
                "name_errors": missing,
                "resolved_calls": resolved,
            })
    for case in cases:
        if case["injected"] and not case["name_errors"]:
            raise SystemExit("injected snippet raised no NameError: " + case["id"])
        if not case["injected"] and case["name_errors"]:
            raise SystemExit("clean snippet raised NameError: " + case["id"])
    json.dump({"python": sys.version.split()[0], "cases": cases}, sys.stdout, indent=1)
    sys.stdout.write("\n")


if __name__ == "__main__":
    main()
