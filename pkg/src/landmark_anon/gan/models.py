"""U-Net generator and patch discriminator."""

from __future__ import annotations

import torch
from torch import nn

from .config import GanConfig

INIT_STD = 0.02


class _Down(nn.Module):
    def __init__(self, cin, cout, normalize=True):
        super().__init__()
        layers = [nn.Conv2d(cin, cout, 4, 2, 1, bias=not normalize)]
        if normalize:
            layers.append(nn.InstanceNorm2d(cout))
        layers.append(nn.LeakyReLU(0.2))
        self.block = nn.Sequential(*layers)

    def forward(self, x):
        return self.block(x)


class _Up(nn.Module):
    def __init__(self, cin, cout, dropout=0.0):
        super().__init__()
        layers = [
            nn.ConvTranspose2d(cin, cout, 4, 2, 1, bias=False),
            nn.InstanceNorm2d(cout),
            nn.ReLU(),
        ]
        if dropout:
            layers.append(nn.Dropout(dropout))
        self.block = nn.Sequential(*layers)

    def forward(self, x, skip):
        return torch.cat([self.block(x), skip], dim=1)


class UNetGenerator(nn.Module):
    """Encoder-decoder with skip connections, log2(image_size) levels deep.

    Input is the landmark raster replicated to 3 channels in [-1, 1]; output
    is an RGB image squashed to [-1, 1] by tanh.
    """

    def __init__(self, image_size: int, base_channels: int = 64, in_channels: int = 3):
        super().__init__()
        depth = GanConfig(image_size=image_size, base_channels=base_channels).depth
        ch = [min(base_channels * 2**i, base_channels * 8) for i in range(depth)]
        self.downs = nn.ModuleList(
            _Down(in_channels if i == 0 else ch[i - 1], ch[i], normalize=0 < i < depth - 1)
            for i in range(depth)
        )
        ups = []
        for j in range(depth - 1):
            i = depth - 1 - j
            cin = ch[i] if j == 0 else ch[i] * 2
            ups.append(_Up(cin, ch[i - 1], dropout=0.5 if j < 3 else 0.0))
        self.ups = nn.ModuleList(ups)
        self.final = nn.Sequential(nn.ConvTranspose2d(ch[0] * 2, 3, 4, 2, 1), nn.Tanh())

    def forward(self, x):
        skips = []
        for down in self.downs:
            x = down(x)
            skips.append(x)
        for j, up in enumerate(self.ups):
            x = up(x, skips[-2 - j])
        return self.final(x)


class PatchDiscriminator(nn.Module):
    """Conditional patch classifier over (raster, face) stacked on channels.

    Emits one logit per receptive field (70x70 pixels at full resolution).
    """

    def __init__(self, base_channels: int = 64, in_channels: int = 6):
        super().__init__()
        b = base_channels

        def block(cin, cout, stride, normalize=True):
            layers = [nn.Conv2d(cin, cout, 4, stride, 1, bias=not normalize)]
            if normalize:
                layers.append(nn.InstanceNorm2d(cout))
            layers.append(nn.LeakyReLU(0.2))
            return layers

        self.model = nn.Sequential(
            *block(in_channels, b, 2, normalize=False),
            *block(b, 2 * b, 2),
            *block(2 * b, 4 * b, 2),
            *block(4 * b, 8 * b, 1),
            nn.Conv2d(8 * b, 1, 4, 1, 1),
        )

    def forward(self, raster, face):
        return self.model(torch.cat([raster, face], dim=1))


def init_weights(module: nn.Module, generator: torch.Generator) -> None:
    """Zero-mean Gaussian weights (std 0.02), zero biases, drawn from ``generator``."""
    for m in module.modules():
        if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d)):
            with torch.no_grad():
                m.weight.normal_(0.0, INIT_STD, generator=generator)
                if m.bias is not None:
                    m.bias.zero_()


def build_models(config: GanConfig) -> tuple[UNetGenerator, PatchDiscriminator]:
    g = torch.Generator().manual_seed(config.seed)
    gen = UNetGenerator(config.image_size, config.base_channels)
    disc = PatchDiscriminator(config.base_channels)
    init_weights(gen, g)
    init_weights(disc, g)
    return gen, disc
