"""Cycle model and discrete-event timing of the accelerator pipeline."""

import numpy as np

from evkws import (
    HwParams,
    SensorConfig,
    calibrate_cycle_model,
    latency_report,
    simulate,
    synth_stream,
    throughput_envelope,
)

# Two measured per-event latencies pin the affine cycle model.
cal = calibrate_cycle_model(min_latency_us=0.47, max_latency_us=4.07)
print(f"cycles(E) = {cal.cycle_base} + {cal.cycle_per_vertex} * (1 + E)"
      f"   (residual {cal.residual_cycles} cycles)")

params = HwParams()
for edges in (0, 4, 12, 20):
    print(f"  E={edges:2d}: {params.cycles(edges)} cycles "
          f"= {params.latency_us(edges):.2f} us")

best, worst = throughput_envelope(params)
print(f"sustained throughput: {best / 1e6:.3f} MeV/s (sparse graphs) "
      f"down to {worst / 1e3:.1f} keV/s (dense)")

# Feed a realistic one-second load through the FIFO + single-server model.
config = SensorConfig(channels=64)
stream = synth_stream(seed=9, config=config, duration_us=1_000_000,
                      rate_profile=625.0)  # ~40 keV/s total
rng = np.random.default_rng(9)
edges = rng.integers(14, 23, size=len(stream))
trace = simulate(stream, edges, params)

report = latency_report(trace)
print(f"\n{len(stream)} events, mean {edges.mean():.1f} edges each")
print(f"overflows: {report['overflows']}  stalls: {report['stalls']}  "
      f"max queue depth: {report['max_queue_depth']}")
w2p = report["window_to_prediction_us"]
print(f"window-to-prediction: min {w2p['min']:.2f}  mean {w2p['mean']:.2f}  "
      f"max {w2p['max']:.2f} us")
e2e = report["end_to_end"]
print(f"end-to-end (sensor included): best possible {e2e['best_us']:.2f}, "
      f"observed {e2e['observed_min_us']:.2f} .. "
      f"{e2e['observed_max_us']:.2f}, bound {e2e['worst_bound_us']:.2f} us")
# closure needs an arrival from the next window, so a quiet gap after a
# window stretches its measured latency past the compute-only bound
print(f"windows outside the envelope: {report['bound_exceeded_windows']}")

# Push the arrival rate past capacity and the queue fills up.
hot = synth_stream(seed=9, config=config, duration_us=50_000,
                   rate_profile=6000.0)
hot_edges = np.full(len(hot), 20)
hot_trace = simulate(hot, hot_edges, params)
print(f"\noverload test: {len(hot)} events in 50 ms "
      f"-> {hot_trace.overflow_count} dropped, "
      f"queue peaked at {hot_trace.max_queue_depth} "
      f"(capacity {params.fifo_depth})")
print(f"processed rate {hot_trace.processed_rate_eps() / 1e3:.1f} keV/s vs "
      f"saturation {params.clock_hz / params.cycles(20) / 1e3:.1f} keV/s")
