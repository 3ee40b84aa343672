"""Compare the analytic loss gradients with finite differences."""
import numpy as np

from smeta import nn
from smeta.models import Architecture, Variant, build_bundle, fuse_half_to_half, loss_smeta_ae, loss_smeta_sae
from smeta.signals import AlignedSignal

rng = np.random.default_rng(0)
arch = Architecture(input_dim=16, hidden_dim=8, latent_dim=4, subject_hidden_dim=4)

# two subjects, three signals each
signals = [AlignedSignal(rng.uniform(size=16), f"S{k // 3}", k % 2, k // 3) for k in range(6)]

ae = build_bundle(rng, arch, Variant.AE)
total, comps, _ = loss_smeta_ae(ae, signals)
print("AE loss", round(total, 4), {k: round(v, 4) for k, v in comps.items()})
err = nn.fd_check(ae, lambda b: (lambda r: (r[0], r[2]))(loss_smeta_ae(b, signals)), step=1e-5)
print(f"AE worst relative error: {err:.2e}")

sae = build_bundle(rng, arch, Variant.SAE)
pairs = fuse_half_to_half(signals[:3], signals[3:], rng)
print("pairs:", [(p.a.subject_id, p.b.subject_id) for p in pairs])
for literal in (False, True):
    err = nn.fd_check(sae, lambda b: (lambda r: (r[0], r[2]))(loss_smeta_sae(b, pairs, literal_adv=literal)))
    print(f"SAE ({'literal -MSE' if literal else 'hinge'}) worst relative error: {err:.2e}")
