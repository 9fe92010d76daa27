"""
Choosing effects and spline flexibility
=======================================

Information criteria for nested effect groups, then a small cross-validation
grid over batch size and degrees of freedom with the one-standard-error rule.
"""

from stream_rem import AdamConfig, EffectConfig, EffectKind, build_case_control, sample_controls
from stream_rem.selection import CvPlan, compare_effect_groups, run_cv, select
from stream_rem.synthgen import Curve, SynthConfig, generate

lag, sim = EffectKind.TIME_LAG, EffectKind.TEXTUAL_SIMILARITY
log, _ = generate(SynthConfig(
    n_patents=1500, arrivals=5.0, cites_per_patent=4, seed=2,
    true_effects=((lag, Curve.sine(1.0, 600.0)), (sim, Curve.zero())),
))
data = build_case_control(log, sample_controls(log, seed=0), [lag, sim])
adam = AdamConfig(psi=0.01, batch_size=2**10)

rows = compare_effect_groups(data, [[], [EffectConfig(lag, df=6)], [EffectConfig(sim, df=6)]], adam,
                             names=["none", "lag", "similarity"])
for r in rows:
    print(f"{r.group:22s} P={r.P:2d}  AIC={r.aic:9.1f}  BIC={r.bic:9.1f}")
# lag lowers both criteria; the similarity effect is pure noise and BIC rises

plan = CvPlan(folds=3, batch_sizes=(2**8, 2**10), df_grid=(4, 6, 8, 12), seed=0)
result = run_cv(data, [EffectConfig(lag)], plan, AdamConfig(psi=0.01, max_epochs=50))
for cell in result.cells():
    print(f"batch {cell[0]:5d} df {cell[1]:2d}: {result.mean(cell):.4f} +/- {result.se(cell):.4f}")
print("selected (batch_size, df):", select(result))
