"""Incremental spectro-temporal neighborhoods, checked against a full scan."""

import numpy as np

from evkws import (
    GraphBuilder,
    GraphParams,
    SensorConfig,
    brute_force_neighbors,
    synth_stream,
)

config = SensorConfig(channels=64)
stream = synth_stream(seed=12, config=config, duration_us=200_000,
                      rate_profile=500.0)

params = GraphParams(r_c=6, skip_step=2, r_t_low=0, r_t_high=5_000)
print(f"reach {params.r_c} channels at stride {params.skip_step}, "
      f"dt window [{params.r_t_low}, {params.r_t_high}] us")
print(f"degree can never exceed {params.max_degree}")

builder = GraphBuilder(config.channels, params)
degrees = np.zeros(len(stream), dtype=np.int64)
history = []
for i, event in enumerate(stream):
    ns = builder.insert_event(event)
    degrees[i] = len(ns)
    # spot-check a handful against the stateless rescan of full history
    if i % 1000 == 0:
        ref = brute_force_neighbors(history, event, params,
                                    channels=config.channels)
        assert sorted((n.record.event.c, n.dt) for n in ns.neighbors) == \
            sorted((n.record.event.c, n.dt) for n in ref.neighbors)
    history.append(event)

print(f"checked {len(stream)} inserts, "
      f"mean degree {degrees.mean():.2f}, max {degrees.max()}")
hist = np.bincount(degrees, minlength=params.max_degree + 1)
for d, n in enumerate(hist):
    bar = "#" * int(60 * n / hist.max())
    print(f"degree {d}: {n:5d} {bar}")
