"""Run the int8 pipeline end to end on a synthetic sample.

Everything after the sensor is integer arithmetic: the four point
convolutions, the windowed max pool, and the recurrent head. Weights here
are random (training happens elsewhere), so the class labels mean nothing;
the point is the mechanics and determinism.
"""

from evkws import (
    FiltrationParams,
    GraphParams,
    InferenceEngine,
    SensorConfig,
    make_thresholds,
    random_weights,
    summarize_predictions,
    synth_stream,
)
from evkws import ThresholdSchedule

config = SensorConfig(channels=64)
weights = random_weights(seed=5)
print(f"model: {len(weights.conv_layers)} conv stages + "
      f"{len(weights.head_blocks)} head blocks, "
      f"{weights.param_count()} parameters, {weights.class_count} classes")

engine = InferenceEngine(
    weights,
    GraphParams(r_c=6, skip_step=1, r_t_low=0, r_t_high=5_000),
    FiltrationParams(div_factor=10, weight=32,
                     thresholds=make_thresholds(
                         ThresholdSchedule("constant", 48, 48), 64)),
)

stream = synth_stream(seed=21, config=config, duration_us=300_000,
                      rate_profile=700.0)
predictions = engine.run(stream)
print(f"{len(stream)} raw events -> {len(predictions)} window predictions")

for pred in predictions[:6]:
    print(f"window {pred.window_index:2d}: class {pred.argmax_class:2d} "
          f"conf {pred.conf:4d} logits {pred.logits.tolist()}")

label, window = summarize_predictions(predictions)
print(f"word decision: class {label} at window {window} "
      f"(t = {10 * (window + 1)} ms)")

# same input, fresh run: bit-identical, no hidden float anywhere
again = engine.run(stream)
assert all(a.logits.tolist() == b.logits.tolist()
           for a, b in zip(predictions, again))
print("rerun is bit-identical")
