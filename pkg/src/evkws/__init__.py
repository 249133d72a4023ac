"""Streaming event-based keyword spotting.

Event streams from a neuromorphic auditory sensor pass through a
decayed-potential filter, become spectro-temporal graph neighborhoods, and
feed a fully int8 network (graph convolutions, windowed max pooling, a
linear/recurrent head) that emits per-window class logits. Companion modules
score predictions and model the timing of a pipelined hardware
implementation.
"""

from .errors import (ConfigError, EvkwsError, OrderingError, ParseError,
                     ValidationError)
from .events import (DEFAULT_WINDOW_US, Event, EventStream, SensorConfig,
                     StreamStats, compute_stats, read_stream, synth_stream,
                     write_stream)
from .filtering import (FiltrationParams, FiltrationState, ThresholdSchedule,
                        filter_step, filter_stream, make_thresholds)
from .graph import (GraphBuilder, GraphParams, Neighbor, NeighborSet,
                    NodeRecord, brute_force_neighbors, edges_per_event,
                    iter_neighbor_sets)
from .hwmodel import (CycleCalibration, HwParams, SimTrace,
                      calibrate_cycle_model, latency_report, simulate,
                      throughput_envelope)
from .inference import (HeadState, InferenceEngine, Prediction, WindowPool,
                        first_layer_inputs, gru_step, head_forward,
                        infer_stream, pointnet_conv, summarize_predictions)
from .metrics import (EvalRecord, MetricReport, accuracy, event_rate_report,
                      macro_f1, metric_report, read_records, ts_accuracy)
from .model import (ConvLayer, GruBlock, LinearBlock, ModelArch, ModelWeights,
                    default_arch, load_weights, random_weights, save_weights)
from .quant import QuantTensor, quantize_dt, requantize, rounding_rshift
from .config import (RunConfig, default_config, expand_sweep, load_config,
                     write_config)

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "EvkwsError", "OrderingError", "ParseError",
    "ValidationError",
    "DEFAULT_WINDOW_US", "Event", "EventStream", "SensorConfig",
    "StreamStats", "compute_stats", "read_stream", "synth_stream",
    "write_stream",
    "FiltrationParams", "FiltrationState", "ThresholdSchedule", "filter_step",
    "filter_stream", "make_thresholds",
    "GraphBuilder", "GraphParams", "Neighbor", "NeighborSet", "NodeRecord",
    "brute_force_neighbors", "edges_per_event", "iter_neighbor_sets",
    "CycleCalibration", "HwParams", "SimTrace", "calibrate_cycle_model",
    "latency_report", "simulate", "throughput_envelope",
    "HeadState", "InferenceEngine", "Prediction", "WindowPool",
    "first_layer_inputs", "gru_step", "head_forward", "infer_stream",
    "pointnet_conv", "summarize_predictions",
    "EvalRecord", "MetricReport", "accuracy", "event_rate_report", "macro_f1",
    "metric_report", "read_records", "ts_accuracy",
    "ConvLayer", "GruBlock", "LinearBlock", "ModelArch", "ModelWeights",
    "default_arch", "load_weights", "random_weights", "save_weights",
    "QuantTensor", "quantize_dt", "requantize", "rounding_rshift",
    "RunConfig", "default_config", "expand_sweep", "load_config",
    "write_config",
]
