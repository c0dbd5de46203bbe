"""Shared builders for synthesis tests."""

import numpy as np

from mfsynth.dlm import DlmState, StateTrajectory
from mfsynth.projection import ProjectionSheet
from mfsynth.synthesis import SYNTHESIS_DISCOUNTS, sample_latent_states

_DUMMY = DlmState(np.zeros(1), np.zeros((1, 1)), 1.0, 1.0)


def make_sheets(h, H, nd, first=1):
    h, H, nd = (np.atleast_2d(np.asarray(a, dtype=float)) for a in (h, H, nd))
    quarters = np.arange(first, first + h.shape[0])
    return [
        ProjectionSheet(f"a{j}", quarters, nd[:, j], h[:, j], H[:, j], _DUMMY, SYNTHESIS_DISCOUNTS)
        for j in range(h.shape[1])
    ]


class _ScriptedNormals:
    """Generator stand-in returning a fixed vector of standard normals."""

    def __init__(self, z):
        self.z = np.asarray(z, dtype=float)

    def standard_normal(self, size):
        return self.z.reshape(size)


def sampler_moments(theta, v, y, h, H, phi):
    """Exact mean and covariance of the latent sampler via its affine dependence on the normals."""
    J = len(h)
    traj = StateTrajectory(np.vstack([theta, theta]), np.array([v]))
    args = (np.array([y]), (h[None, :], H[None, :]), phi[None, :])
    base = sample_latent_states(traj, *args, _ScriptedNormals(np.zeros(J + 1)))[0]
    M = np.column_stack([
        sample_latent_states(traj, *args, _ScriptedNormals(np.eye(J + 1)[k]))[0] - base for k in range(J + 1)
    ])
    return base, M @ M.T
