"""U-Net with a ResNet-34 encoder for binary vessel segmentation.

Single-channel input, two-logit output. The encoder is a randomly
initialised torchvision ResNet-34 with its stem adapted to one channel;
the decoder upsamples through five stages with skip connections from
every encoder resolution. Inputs are reflect-padded to a multiple of 32
and the logits cropped back, so arbitrary window sizes work.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn
from torchvision.models import resnet34

STRIDE_MULTIPLE = 32


class _DecoderBlock(nn.Module):
    def __init__(self, in_ch: int, skip_ch: int, out_ch: int):
        super().__init__()
        self.conv1 = nn.Conv2d(in_ch + skip_ch, out_ch, 3, padding=1, bias=False)
        self.bn1 = nn.BatchNorm2d(out_ch)
        self.conv2 = nn.Conv2d(out_ch, out_ch, 3, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(out_ch)

    def forward(self, x, skip):
        x = F.interpolate(x, scale_factor=2, mode="nearest")
        if skip is not None:
            x = torch.cat([x, skip], dim=1)
        x = F.relu(self.bn1(self.conv1(x)), inplace=True)
        return F.relu(self.bn2(self.conv2(x)), inplace=True)


class UNetResNet34(nn.Module):
    def __init__(self):
        super().__init__()
        enc = resnet34(weights=None)
        self.stem = nn.Sequential(
            nn.Conv2d(1, 64, 7, stride=2, padding=3, bias=False), enc.bn1, enc.relu
        )
        self.pool = enc.maxpool
        self.layer1 = enc.layer1  # 64,  /4
        self.layer2 = enc.layer2  # 128, /8
        self.layer3 = enc.layer3  # 256, /16
        self.layer4 = enc.layer4  # 512, /32
        self.up4 = _DecoderBlock(512, 256, 256)
        self.up3 = _DecoderBlock(256, 128, 128)
        self.up2 = _DecoderBlock(128, 64, 64)
        self.up1 = _DecoderBlock(64, 64, 64)
        self.up0 = _DecoderBlock(64, 0, 32)
        self.head = nn.Conv2d(32, 2, 1)

    def forward(self, x):
        h, w = x.shape[-2:]
        pad_h = (-h) % STRIDE_MULTIPLE
        pad_w = (-w) % STRIDE_MULTIPLE
        if pad_h or pad_w:
            x = F.pad(x, (0, pad_w, 0, pad_h), mode="reflect")
        s0 = self.stem(x)           # /2
        s1 = self.layer1(self.pool(s0))  # /4
        s2 = self.layer2(s1)        # /8
        s3 = self.layer3(s2)        # /16
        s4 = self.layer4(s3)        # /32
        d = self.up4(s4, s3)
        d = self.up3(d, s2)
        d = self.up2(d, s1)
        d = self.up1(d, s0)
        d = self.up0(d, None)
        logits = self.head(d)
        return logits[..., :h, :w]
