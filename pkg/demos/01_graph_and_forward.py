"""
The parameter graph and one forward pass
========================================

Four telemetry channels are graph nodes. Edges say which channel informs
which; by default both irradiances and the air temperature point at the
module temperature.
"""

import numpy as np

from pvtgnn.graph import build_parameter_graph
from pvtgnn.model import FeatureWindow, ModelDims, gcn_forward, init_params, model_forward

spec = build_parameter_graph()
print(spec.node_names)
print(spec.spatial_edges)   # (source, target) index pairs
print(spec.neighbor_counts)  # only T_pv has in-neighbours

# mean aggregation as a matrix: row i averages the in-neighbours of node i
print(spec.aggregation_matrix())

# weights are uniform in +-1/sqrt(fan_in), drawn from a seeded stream
dims = ModelDims(num_nodes=4, feature_dim=1, gcn_hidden=8, hidden=16)
params = init_params(0, dims)
print({name: t.shape for name, t in params.tensors.items()})
print("scalars:", params.num_scalars())

# one step through the graph layer: 4 nodes x 8 hidden = 32 numbers
x_t = np.array([0.8, 0.4, 0.6, 0.7])
z = gcn_forward(x_t, spec, params)
print(z.shape, z.min() >= 0.0)

# a window is L scaled snapshots; the model nowcasts power at the last one
rng = np.random.default_rng(1)
window = FeatureWindow(rng.uniform(0, 1, (12, 4, 1)), target=0.5, timestamp=0)
print("prediction:", model_forward(window, spec, params))
