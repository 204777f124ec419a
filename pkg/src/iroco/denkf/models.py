"""The four learnable modules of the filter, bundled with their layer specs.

Default architectures (hidden widths, ReLU hidden activations, linear output):

- transition: window*27 -> 256 -> 512 -> 27, dropout on both hidden layers
- observation: 27 -> 32 -> 32 -> 64 -> 64 -> 27, deterministic
- noise: 27 -> 16 -> 16 -> 27, deterministic (output is softplus-ed into a
  positive diagonal where it is consumed)
- sensor: window*22 -> 256 -> 256 -> 64 -> 64 -> 27, dropout on all hidden
  layers

The dropout layers are what make the transition and sensor models stochastic:
each ensemble member runs them with freshly drawn masks, which doubles as the
filter's process noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..datamodel import OBS_DIM, STATE_DIM
from ..neural.mlp import MlpParams, MlpSpec, check_params, init_mlp

DEFAULT_WINDOW = 5
DEFAULT_DROPOUT = 0.1


def default_model_specs(
    window: int = DEFAULT_WINDOW,
    width_div: int = 1,
    state_dim: int = STATE_DIM,
    raw_dim: int = OBS_DIM,
) -> dict[str, MlpSpec]:
    """Layer specs for all four modules; width_div shrinks hidden widths."""
    if window < 1 or width_div < 1:
        raise ValueError("window and width_div must be at least 1")

    def w(width: int, out_dim: int) -> int:
        # Hidden layers are never shrunk below the module's output dimension:
        # a narrower bottleneck makes the module's Jacobian rank-deficient, so
        # the update step cannot contract the missing state directions and
        # dropout inflates their spread without bound.  Full widths (div 1)
        # are unchanged by the floor.
        return max(width // width_div, min(width, out_dim), 2)

    return {
        "transition": MlpSpec(
            window * state_dim, (w(256, state_dim), w(512, state_dim)), state_dim, (True, True)
        ),
        "observation": MlpSpec(
            state_dim,
            tuple(w(x, state_dim) for x in (32, 32, 64, 64)),
            state_dim,
            (False,) * 4,
        ),
        "noise": MlpSpec(
            state_dim, (w(16, state_dim), w(16, state_dim)), state_dim, (False, False)
        ),
        "sensor": MlpSpec(
            window * raw_dim,
            tuple(w(x, state_dim) for x in (256, 256, 64, 64)),
            state_dim,
            (True,) * 4,
        ),
    }


@dataclass
class FilterModels:
    transition_spec: MlpSpec
    observation_spec: MlpSpec
    noise_spec: MlpSpec
    sensor_spec: MlpSpec
    transition: MlpParams
    observation: MlpParams
    noise: MlpParams
    sensor: MlpParams
    window: int
    dropout: float

    @property
    def state_dim(self) -> int:
        return self.transition_spec.out_dim

    @property
    def raw_dim(self) -> int:
        return self.sensor_spec.in_dim // self.window

    def validate(self) -> None:
        """Check parameter shapes and cross-module dimension coherence."""
        check_params(self.transition_spec, self.transition)
        check_params(self.observation_spec, self.observation)
        check_params(self.noise_spec, self.noise)
        check_params(self.sensor_spec, self.sensor)
        s = self.state_dim
        if self.transition_spec.in_dim != self.window * s:
            raise ValueError("transition input must cover a full state window")
        if self.observation_spec.in_dim != s or self.observation_spec.out_dim != s:
            raise ValueError("observation model must map state to state-sized encoding")
        if self.noise_spec.in_dim != s or self.noise_spec.out_dim != s:
            raise ValueError("noise model must produce one diagonal entry per dimension")
        if self.sensor_spec.in_dim % self.window != 0 or self.sensor_spec.out_dim != s:
            raise ValueError("sensor input must cover a full raw window")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")

    def parameter_arrays(self) -> list[np.ndarray]:
        """Every weight/bias array in a stable order (optimizer contract)."""
        return (
            self.transition.flat_arrays()
            + self.observation.flat_arrays()
            + self.noise.flat_arrays()
            + self.sensor.flat_arrays()
        )


def build_filter_models(
    window: int = DEFAULT_WINDOW,
    dropout: float = DEFAULT_DROPOUT,
    width_div: int = 1,
    rng: np.random.Generator | None = None,
    state_dim: int = STATE_DIM,
    raw_dim: int = OBS_DIM,
) -> FilterModels:
    rng = rng or np.random.default_rng()
    specs = default_model_specs(window, width_div, state_dim, raw_dim)
    models = FilterModels(
        transition_spec=specs["transition"],
        observation_spec=specs["observation"],
        noise_spec=specs["noise"],
        sensor_spec=specs["sensor"],
        transition=init_mlp(specs["transition"], rng),
        observation=init_mlp(specs["observation"], rng),
        noise=init_mlp(specs["noise"], rng),
        sensor=init_mlp(specs["sensor"], rng),
        window=window,
        dropout=dropout,
    )
    models.validate()
    return models
