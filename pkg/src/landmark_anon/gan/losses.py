"""Adversarial and reconstruction losses."""

from __future__ import annotations

import torch
import torch.nn.functional as F

from ..errors import InvalidArgumentError, NumericError


def _check_finite(**tensors):
    for name, t in tensors.items():
        if not torch.isfinite(t).all():
            raise NumericError(f"non-finite values in {name}")


def bce_with_logits(logits: torch.Tensor, real: bool) -> torch.Tensor:
    target = torch.ones_like(logits) if real else torch.zeros_like(logits)
    return F.binary_cross_entropy_with_logits(logits, target)


def generator_loss(d_fake, gen_out, target, lambda_l1):
    adv = bce_with_logits(d_fake, real=True)
    l1 = F.l1_loss(gen_out, target)
    return adv + lambda_l1 * l1, adv, l1


def discriminator_loss(d_real, d_fake):
    return 0.5 * (bce_with_logits(d_real, real=True) + bce_with_logits(d_fake, real=False))


def gan_losses(d_real, d_fake, gen_out, target, lambda_l1: float):
    """Generator and discriminator objectives from discriminator logits.

    Returns ``(g_loss, d_loss, components)`` where components holds the
    adversarial and L1 parts of the generator objective as floats.
    """
    _check_finite(d_real=d_real, d_fake=d_fake, gen_out=gen_out, target=target)
    if gen_out.shape != target.shape:
        raise InvalidArgumentError(f"gen_out {tuple(gen_out.shape)} != target {tuple(target.shape)}")
    g_loss, adv, l1 = generator_loss(d_fake, gen_out, target, lambda_l1)
    d_loss = discriminator_loss(d_real, d_fake)
    components = {
        "generator_adv_loss": adv.item(),
        "generator_l1_loss": l1.item(),
        "discriminator_loss": d_loss.item(),
    }
    return g_loss, d_loss, components
