"""Actor/critic networks with a spatial-softmax convolutional trunk.

One shared actor serves every agent slot and one shared centralized
critic scores the joint observation-action tuple, so the actor transfers
unchanged to scenarios with a different number of agents (the critic is
rebuilt, but it is only needed for training).
"""

import torch
import torch.nn as nn

CONV_SPEC = ((32, 4, 2), (64, 3, 2), (64, 2, 1))
HIDDEN = 128


def spatial_softmax(feature_maps):
    """Channel-wise soft-argmax: (B, C, h, w) -> (B, 2C) expected coords.

    Per channel, a softmax over the h*w cells followed by the expected
    (x, y) position in normalized [-1, 1] coordinates; output is all C
    x-coordinates followed by all C y-coordinates.
    """
    b, c, h, w = feature_maps.shape
    flat = feature_maps.reshape(b, c, h * w)
    probs = torch.softmax(flat, dim=-1)
    device, dtype = feature_maps.device, feature_maps.dtype
    xs = torch.linspace(-1.0, 1.0, w, device=device, dtype=dtype)
    ys = torch.linspace(-1.0, 1.0, h, device=device, dtype=dtype)
    grid_x = xs.repeat(h)
    grid_y = ys.repeat_interleave(w)
    expected_x = probs @ grid_x
    expected_y = probs @ grid_y
    return torch.cat([expected_x, expected_y], dim=-1)


class SpatialSoftmaxEncoder(nn.Module):
    """Three-layer conv stack ending in the spatial-softmax bottleneck."""

    def __init__(self, in_channels=3):
        super().__init__()
        layers = []
        prev = in_channels
        for filters, kernel, stride in CONV_SPEC:
            layers.append(nn.Conv2d(prev, filters, kernel, stride))
            layers.append(nn.ReLU())
            prev = filters
        self.conv = nn.Sequential(*layers[:-1])  # softmax replaces the last ReLU
        self.out_features = 2 * CONV_SPEC[-1][0]

    def forward(self, images):
        return spatial_softmax(self.conv(images))


class Actor(nn.Module):
    """Shared decentralized policy: one agent's image + velocity -> action."""

    def __init__(self, a_max=0.5):
        super().__init__()
        self.a_max = a_max
        self.encoder = SpatialSoftmaxEncoder()
        self.head = nn.Sequential(
            nn.Linear(self.encoder.out_features + 2, HIDDEN),
            nn.ReLU(),
            nn.Linear(HIDDEN, HIDDEN),
            nn.ReLU(),
            nn.Linear(HIDDEN, 2),
        )

    def raw(self, image, velocity):
        """Pre-squash action logits (used for saturation regularization)."""
        feats = self.encoder(image)
        return self.head(torch.cat([feats, velocity], dim=-1))

    def forward(self, image, velocity):
        return self.a_max * torch.tanh(self.raw(image, velocity))


class Critic(nn.Module):
    """Shared centralized value: all agents' images, velocities, actions.

    The same encoder weights are applied to every agent slot's image; the
    resulting features are concatenated with all velocities and actions,
    so the input width is n_agents * (features + 2 + 2).
    """

    def __init__(self, n_agents):
        super().__init__()
        self.n_agents = n_agents
        self.encoder = SpatialSoftmaxEncoder()
        width = n_agents * (self.encoder.out_features + 2 + 2)
        self.head = nn.Sequential(
            nn.Linear(width, HIDDEN),
            nn.ReLU(),
            nn.Linear(HIDDEN, HIDDEN),
            nn.ReLU(),
            nn.Linear(HIDDEN, 1),
        )
        self.input_width = width

    def forward(self, images, velocities, actions):
        """images: (B, N, 3, H, W); velocities, actions: (B, N, 2)."""
        b, n = images.shape[:2]
        feats = self.encoder(images.reshape(b * n, *images.shape[2:]))
        feats = feats.reshape(b, n, -1)
        joint = torch.cat([feats, velocities, actions], dim=-1).reshape(b, -1)
        return self.head(joint).squeeze(-1)
