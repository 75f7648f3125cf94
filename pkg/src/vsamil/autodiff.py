"""Minimal reverse-mode automatic differentiation over float64 arrays.

Values are numpy arrays; :class:`Node` wraps a value together with its
parents and a vector-Jacobian closure. Graphs are built eagerly by the op
functions below and differentiated with :func:`backward`, which keeps all
adjoints in a local table so repeated calls on the same graph are
side-effect free.

Shape rules are deliberately narrow: elementwise ops take equal shapes, a
size-1 operand, or a trailing row vector against a matrix (the batched
affine-bias case). Anything else is rejected with both shapes named.
"""

import numpy as np


class Node:
    __slots__ = ("value", "parents", "_vjp")

    def __init__(self, value, parents=(), vjp=None):
        value = np.asarray(value, dtype=np.float64)
        if not value.flags["C_CONTIGUOUS"]:
            value = np.ascontiguousarray(value)  # keeps 0-d shapes intact
        self.value = value
        self.parents = parents
        self._vjp = vjp

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Node(shape={self.value.shape})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return mul(self, -1.0)


def param(value):
    """Leaf node holding learnable values."""
    return Node(value)


def _as_value(x):
    if isinstance(x, Node):
        return x.value
    return np.asarray(x, dtype=np.float64)


def _check_elementwise(va, vb, opname):
    if va.shape == vb.shape or va.size == 1 or vb.size == 1:
        return
    if va.ndim == 2 and vb.shape == va.shape[1:]:
        return
    if vb.ndim == 2 and va.shape == vb.shape[1:]:
        return
    raise ValueError(f"{opname}: incompatible shapes {va.shape} vs {vb.shape}")


def _reduce_to(adj, shape):
    """Collapse a broadcast adjoint back to the operand's shape."""
    if adj.shape == shape:
        return adj
    if int(np.prod(shape)) == 1:
        return np.asarray(adj.sum()).reshape(shape)
    if adj.ndim == 2 and shape == adj.shape[1:]:
        return adj.sum(axis=0)
    raise ValueError(f"cannot reduce adjoint of shape {adj.shape} to {shape}")


def _binary(a, b, opname, fwd, da, db):
    va, vb = _as_value(a), _as_value(b)
    _check_elementwise(va, vb, opname)
    out = fwd(va, vb)
    parents = []
    slots = []
    if isinstance(a, Node):
        parents.append(a)
        slots.append(("a", va.shape))
    if isinstance(b, Node):
        parents.append(b)
        slots.append(("b", vb.shape))

    def vjp(g):
        grads = []
        for which, shape in slots:
            raw = da(g, va, vb) if which == "a" else db(g, va, vb)
            grads.append(_reduce_to(raw, shape))
        return grads

    return Node(out, tuple(parents), vjp if parents else None)


def add(a, b):
    return _binary(a, b, "add", lambda x, y: x + y,
                   lambda g, x, y: g, lambda g, x, y: g)


def sub(a, b):
    return _binary(a, b, "sub", lambda x, y: x - y,
                   lambda g, x, y: g, lambda g, x, y: -g)


def mul(a, b):
    """Elementwise (Hadamard) product; also covers scalar scaling."""
    return _binary(a, b, "mul", lambda x, y: x * y,
                   lambda g, x, y: g * y, lambda g, x, y: g * x)


def matmul(a, b):
    va, vb = _as_value(a), _as_value(b)
    if va.ndim != 2 or vb.ndim != 2 or va.shape[1] != vb.shape[0]:
        raise ValueError(f"matmul: incompatible shapes {va.shape} vs {vb.shape}")
    parents = []
    slots = []
    if isinstance(a, Node):
        parents.append(a)
        slots.append("a")
    if isinstance(b, Node):
        parents.append(b)
        slots.append("b")

    def vjp(g):
        grads = []
        for which in slots:
            grads.append(g @ vb.T if which == "a" else va.T @ g)
        return grads

    return Node(va @ vb, tuple(parents), vjp if parents else None)


def transpose(a):
    va = a.value
    if va.ndim != 2:
        raise ValueError(f"transpose: expected a matrix, got shape {va.shape}")
    return Node(va.T, (a,), lambda g: [g.T])


def relu(a):
    va = a.value
    mask = va > 0
    return Node(np.where(mask, va, 0.0), (a,), lambda g: [g * mask])


def tanh(a):
    out = np.tanh(a.value)
    return Node(out, (a,), lambda g: [g * (1.0 - out * out)])


def sigmoid(a):
    out = _sigmoid_value(a.value)
    return Node(out, (a,), lambda g: [g * out * (1.0 - out)])


def _sigmoid_value(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def square(a):
    va = a.value
    return Node(va * va, (a,), lambda g: [2.0 * g * va])


def absval(a):
    va = a.value
    return Node(np.abs(va), (a,), lambda g: [g * np.sign(va)])


def _expand(g, shape, axis):
    if axis is None:
        return np.broadcast_to(g, shape).copy()
    return np.broadcast_to(np.expand_dims(g, axis), shape).copy()


def sum_reduce(a, axis=None):
    va = a.value
    return Node(va.sum(axis=axis), (a,),
                lambda g: [_expand(g, va.shape, axis)])


def mean(a, axis=None):
    va = a.value
    n = va.size if axis is None else va.shape[axis]
    return Node(va.mean(axis=axis), (a,),
                lambda g: [_expand(g, va.shape, axis) / n])


def l2norm(a, axis=None):
    """Euclidean norm, full or per-slice along ``axis``."""
    va = a.value
    out = np.sqrt((va * va).sum(axis=axis))

    def vjp(g):
        denom = out if axis is None else np.expand_dims(out, axis)
        safe = np.where(denom > 0.0, denom, 1.0)
        return [_expand(g, va.shape, axis) * va / safe]

    return Node(out, (a,), vjp)


def max_reduce(a, axis=None):
    """Max over all entries or along ``axis``.

    The subgradient routes to exactly one arg-extremal element per output
    (first index on ties).
    """
    return _extremum(a, axis, np.max, np.argmax)


def min_reduce(a, axis=None):
    return _extremum(a, axis, np.min, np.argmin)


def _extremum(a, axis, reduce_fn, arg_fn):
    va = a.value
    out = reduce_fn(va, axis=axis)
    idx = arg_fn(va, axis=axis)

    def vjp(g):
        grad = np.zeros_like(va)
        if axis is None:
            grad.flat[idx] = np.asarray(g).sum()
        elif va.ndim == 1:
            grad[idx] = g
        else:
            sel = [np.arange(s) for s in out.shape]
            full = list(np.meshgrid(*sel, indexing="ij")) if sel else []
            full.insert(axis, idx)
            grad[tuple(full)] = g
        return [grad]

    return Node(out, (a,), vjp)


def stack1d(nodes):
    """Stack scalar nodes into a vector node."""
    values = []
    for n in nodes:
        if n.value.size != 1:
            raise ValueError(f"stack1d: expected scalars, got shape {n.value.shape}")
        values.append(float(n.value))

    def vjp(g):
        return [np.asarray(g[i]).reshape(nodes[i].value.shape) for i in range(len(nodes))]

    return Node(np.array(values), tuple(nodes), vjp)


def bce_with_logits(logit, target):
    """Elementwise binary cross entropy on logits, numerically stable.

    ``target`` is a constant in [0, 1] (scalar or same shape as ``logit``).
    """
    z = logit.value
    t = np.asarray(target, dtype=np.float64)
    if np.any(t < 0.0) or np.any(t > 1.0):
        raise ValueError(f"bce_with_logits: target outside [0, 1]: {t}")
    _check_elementwise(z, t, "bce_with_logits")
    out = np.maximum(z, 0.0) - z * t + np.log1p(np.exp(-np.abs(z)))

    def vjp(g):
        return [_reduce_to(g * (_sigmoid_value(z) - t), z.shape)]

    return Node(out, (logit,), vjp)


def backward(loss, params):
    """Adjoints of ``loss`` with respect to ``params``.

    Returns ``{param: gradient}`` with a zero array for parameters the loss
    does not reach. ``loss`` must be scalar-shaped.
    """
    if loss.value.size != 1:
        raise ValueError(f"backward: loss must be scalar-shaped, got {loss.value.shape}")

    topo = []
    seen = set()
    stack = [(loss, False)]
    while stack:
        node, done = stack.pop()
        if done:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if id(p) not in seen:
                stack.append((p, False))

    adjoints = {id(loss): np.ones_like(loss.value)}
    for node in reversed(topo):
        g = adjoints.get(id(node))
        if g is None or node._vjp is None:
            continue
        for parent, contrib in zip(node.parents, node._vjp(g)):
            prev = adjoints.get(id(parent))
            adjoints[id(parent)] = contrib if prev is None else prev + contrib

    return {p: adjoints.get(id(p), np.zeros_like(p.value)) for p in params}
