"""Runs one generated algorithm class against the harness.

Usage: bag_shim.py <source_file> <entry_name>

Reads an init message from stdin, builds entry(budget, dim, seed) and calls
it with a function proxy. Each proxy call sends an ask and blocks for the
matching tell. A stop message or a closed stream ends the run cleanly.
"""

import importlib.util
import json
import sys


class _Stop(BaseException):
    pass


class _Namespace:
    def __init__(self, **kw):
        self.__dict__.update(kw)


class FunctionProxy:
    def __init__(self, init, inp, out):
        import numpy as np

        self._np = np
        self._in = inp
        self._out = out
        self._real = init["domain"] == "real"
        dim = int(init["dim"])
        self.state = _Namespace(evaluations=0)
        lb = float(init.get("lb", 0.0))
        ub = float(init.get("ub", 1.0))
        self.bounds = _Namespace(lb=np.full(dim, lb), ub=np.full(dim, ub))
        self.optimum = _Namespace(y=init.get("y_opt"))
        self.meta_data = _Namespace(n_variables=dim, maximize=init.get("orientation") == "max")
        self.stopped = False

    def __call__(self, x):
        if self.stopped:
            raise _Stop()
        flat = self._np.asarray(x).ravel().tolist()
        if not self._real:
            flat = [int(round(v)) for v in flat]
        self._out.write(json.dumps({"type": "ask", "x": flat}) + "\n")
        self._out.flush()
        while True:
            line = self._in.readline()
            if not line:
                self.stopped = True
                raise _Stop()
            line = line.strip()
            if not line:
                continue
            msg = json.loads(line)
            if msg.get("type") == "tell":
                self.state.evaluations = int(msg["evals"])
                return float(msg["y"])
            if msg.get("type") == "stop":
                self.stopped = True
                raise _Stop()


def _numpy_aliases():
    # The reference code in the prompts uses spellings removed in NumPy 2.
    try:
        import numpy as np
    except ImportError:
        return
    for name, value in (("Inf", np.inf), ("NaN", np.nan), ("infty", np.inf)):
        if not hasattr(np, name):
            setattr(np, name, value)


def _load(path, entry):
    spec = importlib.util.spec_from_file_location("candidate", path)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return getattr(module, entry)


def main(argv):
    if len(argv) != 3:
        sys.stderr.write("usage: bag_shim.py <source_file> <entry_name>\n")
        return 2
    out = sys.stdout
    sys.stdout = sys.stderr  # stray prints must not corrupt the protocol
    _numpy_aliases()
    cls = _load(argv[1], argv[2])
    line = sys.stdin.readline()
    if not line:
        return 0
    init = json.loads(line)
    func = FunctionProxy(init, sys.stdin, out)
    algorithm = cls(int(init["budget"]), int(init["dim"]), int(init["seed"]))
    try:
        algorithm(func)
    except _Stop:
        pass
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
