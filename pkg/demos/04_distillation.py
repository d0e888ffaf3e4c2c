"""
Distilling a trilinear teacher into a bilinear student
======================================================

In the open-ended setting the answer is what we want to predict, so it can't
be an input at test time.  A teacher that sees (V, Q, right answer) can still
train a (V, Q) student through its temperature-softened outputs.
"""

from dataclasses import replace

from trifuse.tasks.experiments import FFOE_SPEC, STUDENT_TRAIN, TEACHER_TRAIN, distillation_comparison

# %%
# One seed, fewer epochs than the acceptance run.  Both students start from
# the same weights and see the same batches; only the loss differs.

res = distillation_comparison(
    1, teacher_cfg=replace(TEACHER_TRAIN, epochs=15), student_cfg=replace(STUDENT_TRAIN, epochs=15))
print(f"teacher (sees the answer): {res.extra['teacher']['acc']:.3f}")
print(f"distilled student:          {res.ours:.3f}")
print(f"hard-label student:         {res.reference:.3f}")

# %%
# Learning curves
# ---------------
# Test accuracy every few epochs.

for d, h in list(zip(res.extra["distilled"], res.extra["hard"]))[::3]:
    print(f"epoch {d['epoch']:2d}   distilled {d['acc']:.3f}   hard {h['acc']:.3f}")

# %%
# The soft part of the loss is scaled by T**2 and its gradient by T, so the
# student uses a smaller step (0.1) than the teacher (0.5).
