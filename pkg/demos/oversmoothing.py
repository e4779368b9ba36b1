"""
Over-smoothing versus Gram-inverse normalization
================================================

Repeatedly applying the random-walk operator drives every feature column
to the constant vector: the columns become indistinguishable and a
classifier trained on the last block fails. PowerEmbed applies the same
operator, but re-normalizes by the inverse Gram matrix each step, so its
iterates converge to the top-k eigenspace instead of collapsing to one
direction.
"""

from powerembed import sample_2b_sbm_dataset
from powerembed.harness import oversmoothing_diagnostic, stratified_split

g, X, y = sample_2b_sbm_dataset(500, 0.5, 0.25, seed=0)
split = stratified_split(y, (0.1, 0.9), seed=0)

rows = oversmoothing_diagnostic(g, X, depths=[0, 1, 2, 10, 50], kind="rw",
                                y=y, split=split)

print("depth | cos to top eigvec      | angle to top-2         | acc (last block)")
print("      | unnormalized  power    | unnormalized  power    | unnormalized  power")
for r in rows:
    print(f"{r['depth']:5d} | {r['unnormalized_cos_top']:.6f}      {r['power_cos_top']:.6f} |"
          f" {r['unnormalized_angle_topk']:.2e}      {r['power_angle_topk']:.2e} |"
          f" {r['unnormalized_acc_last']:.3f}         {r['power_acc_last']:.3f}")
