import os
import sys

# ctest points ETMKIT_BUILD_TREE at the freshly built package. An editable
# install registers a meta-path finder that would otherwise win over sys.path.
tree = os.environ.get("ETMKIT_BUILD_TREE")
if tree:
    sys.meta_path[:] = [f for f in sys.meta_path if "ScikitBuild" not in type(f).__name__]
    sys.path.insert(0, tree)
    for name in [m for m in sys.modules if m == "etmkit" or m.startswith("etmkit.")]:
        del sys.modules[name]
