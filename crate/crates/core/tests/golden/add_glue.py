#!/usr/bin/env python3
# Glue for routine `add`, generated by `comodi wrap`. Do not edit.
#
# Speaks the line-delimited JSON component protocol on stdin/stdout. The
# routine is called with its in-arguments in declaration order and must
# return its out-arguments in declaration order followed by its result
# (a tuple when there is more than one value). It is looked up in this
# file first, then in a module of the same name.
import base64
import json
import math
import sys

COMPONENT = "local.add"
VERSION = "0.1.0"
ROUTINE = "add"
SPEC = json.loads("{\"inputs\":[[\"a\",{\"kind\":\"real64\"}],[\"b\",{\"kind\":\"real64\"}]],\"outputs\":[[\"result\",{\"kind\":\"real64\"}]]}")


class BadValue(Exception):
    pass


def _routine():
    fn = globals().get(ROUTINE)
    if fn is None:
        import importlib
        fn = getattr(importlib.import_module(ROUTINE), ROUTINE)
    return fn


def _nest(flat, shape):
    if len(shape) == 1:
        return list(flat)
    step = 1
    for s in shape[1:]:
        step *= s
    return [_nest(flat[i * step:(i + 1) * step], shape[1:]) for i in range(shape[0])]


def decode(x, ty, path):
    kind = ty["kind"]
    if kind == "integer64":
        if isinstance(x, int) and not isinstance(x, bool):
            return x
    elif kind == "real64":
        if isinstance(x, (int, float)) and not isinstance(x, bool):
            return float(x)
        special = {"NaN": math.nan, "Infinity": math.inf, "-Infinity": -math.inf}
        if x in special:
            return special[x]
    elif kind == "boolean":
        if isinstance(x, bool):
            return x
    elif kind == "text":
        if isinstance(x, str):
            return x
    elif kind == "array":
        if isinstance(x, dict) and isinstance(x.get("shape"), list) and isinstance(x.get("data"), list):
            shape, data = x["shape"], x["data"]
            size = 1
            for s in shape:
                size *= s
            if len(shape) != ty["rank"] or size != len(data):
                raise BadValue(path + ": shape mismatch")
            return _nest([decode(v, ty["element"], path + "[]") for v in data], shape)
    elif kind == "composite":
        if isinstance(x, dict):
            return {name: decode(x.get(name), fty, path + "." + name) for name, fty in ty["fields"].items()}
    elif kind == "opaque":
        if isinstance(x, str):
            return base64.b64decode(x)
    raise BadValue("%s: expected %s" % (path, kind))


def _flatten(v, rank, path):
    if rank == 0:
        return [v], []
    if hasattr(v, "tolist"):
        v = v.tolist()
    if not isinstance(v, (list, tuple)):
        raise BadValue(path + ": expected a nested sequence")
    data, inner = [], None
    for item in v:
        d, s = _flatten(item, rank - 1, path)
        if inner is not None and s != inner:
            raise BadValue(path + ": ragged array")
        inner = s
        data.extend(d)
    return data, [len(v)] + (inner if inner is not None else [0] * (rank - 1))


def encode(v, ty, path):
    kind = ty["kind"]
    if kind == "integer64":
        if hasattr(v, "item"):
            v = v.item()
        if isinstance(v, int) and not isinstance(v, bool) and -2**63 <= v < 2**63:
            return v
    elif kind == "real64":
        if isinstance(v, bool):
            raise BadValue(path + ": expected real64")
        v = float(v)
        if math.isnan(v):
            return "NaN"
        if math.isinf(v):
            return "Infinity" if v > 0 else "-Infinity"
        return v
    elif kind == "boolean":
        if isinstance(v, bool) or type(v).__name__ == "bool_":
            return bool(v)
    elif kind == "text":
        if isinstance(v, str):
            return v
    elif kind == "array":
        data, shape = _flatten(v, ty["rank"], path)
        return {"shape": shape, "data": [encode(e, ty["element"], path + "[]") for e in data]}
    elif kind == "composite":
        get = v.get if isinstance(v, dict) else (lambda name: getattr(v, name))
        return {name: encode(get(name), fty, path + "." + name) for name, fty in ty["fields"].items()}
    elif kind == "opaque":
        if isinstance(v, (bytes, bytearray)):
            return base64.b64encode(bytes(v)).decode("ascii")
    raise BadValue("%s: expected %s" % (path, kind))


def _send(msg):
    sys.stdout.write(json.dumps(msg, allow_nan=False) + "\n")
    sys.stdout.flush()


def _error(code, detail):
    _send({"msg": "error", "code": code, "detail": detail})


def _invoke(msg, fn):
    inputs = msg.get("inputs")
    if not isinstance(inputs, dict):
        return _error("PROTOCOL_VIOLATION", "invoke without inputs")
    try:
        args = [decode(inputs[name], ty, name) for name, ty in SPEC["inputs"]]
    except KeyError as e:
        return _error("BAD_INPUT", "missing input %s" % e)
    except BadValue as e:
        return _error("BAD_INPUT", str(e))
    try:
        ret = fn(*args)
    except Exception as e:
        return _error("ROUTINE_ERROR", "%s: %s" % (type(e).__name__, e))
    outs = SPEC["outputs"]
    try:
        values = [] if not outs else [ret] if len(outs) == 1 else list(ret)
        if len(values) != len(outs):
            raise BadValue("expected %d values, got %d" % (len(outs), len(values)))
        encoded = {name: encode(v, ty, name) for (name, ty), v in zip(outs, values)}
    except (BadValue, TypeError, ValueError, AttributeError) as e:
        return _error("BAD_OUTPUT", str(e))
    _send({"msg": "result", "outputs": encoded})


def main():
    _send({"msg": "hello", "protocol": 1, "component": COMPONENT, "version": VERSION})
    fn = None
    while True:
        line = sys.stdin.readline()
        if not line:
            return
        line = line.strip()
        if not line:
            continue
        try:
            msg = json.loads(line)
        except ValueError as e:
            _error("PROTOCOL_VIOLATION", "bad message: %s" % e)
            continue
        kind = msg.get("msg") if isinstance(msg, dict) else None
        if kind == "close":
            return
        if kind != "invoke":
            _error("PROTOCOL_VIOLATION", "unexpected message %r" % kind)
            continue
        if fn is None:
            try:
                fn = _routine()
            except Exception as e:
                _error("ROUTINE_MISSING", "%s: %s" % (type(e).__name__, e))
                continue
        _invoke(msg, fn)


if __name__ == "__main__":
    main()
