"""edgeprofiler: profile small AI training workloads, learn cost models,
and simulate prediction-driven offload scheduling on heterogeneous edge
nodes.
"""

__version__ = "0.1.0"
