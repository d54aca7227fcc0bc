from .faults import FAULTS, DelayedNode, EquivocatingNode, MuteNode, SignatureCorruptingNode
from .messages import Message
from .node import Node, NodeParams, Outbound
from .simulation import ConfigError, Network, NetworkConfig, Trace, WorkloadItem, run_simulation

__all__ = [
    "FAULTS",
    "ConfigError",
    "DelayedNode",
    "EquivocatingNode",
    "Message",
    "MuteNode",
    "Network",
    "NetworkConfig",
    "Node",
    "NodeParams",
    "Outbound",
    "SignatureCorruptingNode",
    "Trace",
    "WorkloadItem",
    "run_simulation",
]
