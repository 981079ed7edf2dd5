# %% [markdown]
# # Plane-wave scattering off a sound-soft disc
#
# Unit square with absorbing sides and a disc of radius 0.15.  The source
# is a plane wave plus a random Matérn field; synthetic readings come from a
# finer mesh driven by a source that is deliberately outside the prior.

# %%
import numpy as np

from statrom.pipeline import build_mesh, generate_data, offline, online, scatter2d

cfg = scatter2d()
mesh = build_mesh(cfg)
print("nodes", mesh.n_nodes, "triangles", mesh.n_elements)
tri = mesh.nodes[mesh.elements]
edges = [tri[:, (i + 1) % 3] - tri[:, i] for i in range(3)]
cosines = [np.sum(-edges[i - 1] * edges[i], axis=1)
           / (np.linalg.norm(edges[i - 1], axis=1) * np.linalg.norm(edges[i], axis=1)) for i in range(3)]
print("smallest angle [deg]", np.degrees(np.arccos(np.clip(cosines, -1, 1))).min().round(1))

# %% [markdown]
# ## One frequency, three data sets
#
# m = 12 around 250 Hz, evaluated at 360 Hz.

# %%
art = offline(cfg)
for ns, no in [(5, 20), (30, 50), (80, 200)]:
    res = online(art, cfg.omega, generate_data(cfg.with_(n_sensors=ns, n_obs=no)))
    for method in ("fom", "without", "with"):
        e, hp = res.errors[method], res.hyperparameters[method]
        print(f"{ns:3d}/{no:<4d} {method:8s} re {e['real']:.6g} im {e['imag']:.6g} "
              f"sigma_d {hp['real'].sigma_d:.3g}")

# %% [markdown]
# The same table from the command line:
#
# ```
# statrom scatter2d --cases 360:12 --out out
# ```
