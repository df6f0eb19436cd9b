"""Simulation and exact analysis of extinction in a leaky spiking-neuron network.

Neurons are active or quiescent. An active neuron spikes at rate 1 (it goes
quiescent and activates its postsynaptic neurons) and leaks at rate
``gamma`` (it goes quiescent). The package provides network builders, an
event-driven simulator with a compiled kernel, exact Markov-chain
computations of extinction-time laws, estimators and scripted experiments.
"""
from ._backend import BACKEND
from .engine import (Configuration, EventRecord, ExtinctionOutcome, ModelParams, ReplicaBatch,
                     Trajectory, configuration, full_configuration, replica_batch, run_replicas,
                     simulate_extinction, simulate_trajectory, step, survival_probe)
from .network import Network, build_complete, build_lattice, from_presynaptic, load_adjacency
from .rng import DEFAULT_SEED, make_stream, replica_stream

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "DEFAULT_SEED",
    "Configuration",
    "EventRecord",
    "ExtinctionOutcome",
    "ModelParams",
    "Network",
    "ReplicaBatch",
    "Trajectory",
    "build_complete",
    "build_lattice",
    "configuration",
    "from_presynaptic",
    "full_configuration",
    "load_adjacency",
    "make_stream",
    "replica_batch",
    "replica_stream",
    "run_replicas",
    "simulate_extinction",
    "simulate_trajectory",
    "step",
    "survival_probe",
]
