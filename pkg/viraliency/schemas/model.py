"""
Model architecture schemas.

ModelConfig describes the shared scoring branch: conv stack, optional
objectness fusion, global pooling and the inner product head.
"""
from enum import Enum
from typing import List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class PoolingMode(str, Enum):
    """Global pooling strategy applied to the last feature maps."""
    GAP = "GAP"
    GMP = "GMP"
    GNAP = "GNAP"
    LENA = "LENA"


def conv_output_size(size: int, kernel: int, stride: int, padding: int) -> int:
    """floor((size + 2*padding - kernel) / stride) + 1."""
    return (size + 2 * padding - kernel) // stride + 1


class ConvLayerSpec(BaseModel):
    """One convolution of the front-end."""

    model_config = ConfigDict(extra="forbid")

    out_channels: int = Field(..., ge=1, description="Output channel count")
    kernel: int = Field(default=3, ge=1, description="Square kernel extent")
    stride: int = Field(default=1, ge=1, description="Stride in both directions")
    padding: int = Field(default=0, ge=0, description="Zero padding on each side")
    activation: Literal["relu", "none"] = Field(
        default="relu",
        description="Activation after the convolution ('none' gives a linear layer)"
    )


class ObjectnessSpec(BaseModel):
    """Side-map fusion settings."""

    model_config = ConfigDict(extra="forbid")

    num_side_maps: int = Field(..., ge=1, description="Number of side maps K' per image")
    fusion_kernel: Literal[1, 3] = Field(
        default=1,
        description="Kernel of the fusion convolution (padding keeps the spatial size)"
    )


class ModelConfig(BaseModel):
    """Architecture of the siamese scoring branch."""

    model_config = ConfigDict(extra="forbid")

    input_channels: int = Field(default=3, ge=1, description="Channels of input images")
    input_height: int = Field(default=64, ge=1, description="Input image height")
    input_width: int = Field(default=64, ge=1, description="Input image width")
    conv_layers: List[ConvLayerSpec] = Field(
        default_factory=lambda: [
            ConvLayerSpec(out_channels=8, kernel=5, stride=2, padding=2),
            ConvLayerSpec(out_channels=16, kernel=3, stride=2, padding=1),
            ConvLayerSpec(out_channels=16, kernel=3, stride=1, padding=1),
        ],
        min_length=1,
        description="Ordered conv stack (JSON list of layer objects)"
    )
    pooling_mode: PoolingMode = Field(
        default=PoolingMode.LENA,
        description="Global pooling: GAP, GMP, GNAP (fixed eta) or LENA (learned eta)"
    )
    eta_init: Union[float, List[float]] = Field(
        default=0.5,
        description="Initial eta, scalar or one value per final channel, each in [0, 1]"
    )
    output_dim: int = Field(default=1, ge=1, description="Inner-product outputs K")
    objectness: Optional[ObjectnessSpec] = Field(
        default=None,
        description="Enable side-map fusion (JSON object) or null"
    )

    @field_validator("eta_init", mode="after")
    @classmethod
    def eta_in_unit_interval(cls, v: Union[float, List[float]]) -> Union[float, List[float]]:
        values = v if isinstance(v, list) else [v]
        if not values:
            raise ValueError("eta_init vector must not be empty")
        for eta in values:
            if not 0.0 <= eta <= 1.0:
                raise ValueError(f"eta_init entries must lie in [0, 1], got {eta}")
        return v

    @model_validator(mode="after")
    def check_geometry(self) -> "ModelConfig":
        """Every conv must produce at least one pixel; eta vector must match L."""
        height, width = self.input_height, self.input_width
        for index, layer in enumerate(self.conv_layers):
            height = conv_output_size(height, layer.kernel, layer.stride, layer.padding)
            width = conv_output_size(width, layer.kernel, layer.stride, layer.padding)
            if height < 1 or width < 1:
                raise ValueError(
                    f"conv layer {index} produces an empty output ({height}x{width})"
                )
        if isinstance(self.eta_init, list) and len(self.eta_init) != self.num_channels:
            raise ValueError(
                f"eta_init has {len(self.eta_init)} entries, final conv has "
                f"{self.num_channels} channels"
            )
        return self

    @property
    def num_channels(self) -> int:
        """Channel count L of the pooled feature maps."""
        return self.conv_layers[-1].out_channels

    def feature_shape(self) -> Tuple[int, int, int]:
        """(L, H, W) of the feature maps fed to global pooling."""
        height, width = self.input_height, self.input_width
        for layer in self.conv_layers:
            height = conv_output_size(height, layer.kernel, layer.stride, layer.padding)
            width = conv_output_size(width, layer.kernel, layer.stride, layer.padding)
        return self.num_channels, height, width

    def eta_vector(self) -> List[float]:
        """eta_init expanded to one value per channel."""
        if isinstance(self.eta_init, list):
            return list(self.eta_init)
        return [float(self.eta_init)] * self.num_channels
