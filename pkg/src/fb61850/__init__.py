"""Function-block substation automation toolkit.

Control logic runs as networks of event-driven function blocks grouped
into resources and devices on a deterministic virtual-time scheduler;
node data follows the logical-device / logical-node / data-object
hierarchy with dot-path references; devices exchange events through a
GOOSE-style publish/subscribe bus and expose their data through a small
TCP read/write server, configured from an SCL subset.  A simulated feeder
with an overcurrent trip, auto-reclose and lockout scenario exercises the
whole stack.
"""

from .blocks import (
    Action,
    BasicFBType,
    CompositeFBType,
    Connection,
    DataPortDef,
    ECState,
    ECTransition,
    EventPort,
    ExecutionControlChart,
    FBInstance,
    ServiceInterfaceFBType,
    ecc_fire,
    get_fb_type,
    register_fb_type,
)
from .goose import DataSetDef, GooseControlBlock, GoosePublisher, InProcGooseBus, Subscription
from .goose_codec import GooseMessage, decode, encode
from .harness import RunConfig, RunSummary, SimulationRun, run, summarize_trace_file
from .lnmodel import (
    LNName,
    LogicalDevice,
    LogicalNode,
    ModelStore,
    ObjectReference,
    build_ln,
    parse_ln_name,
    parse_reference,
)
from .loader import load_system
from .runtime import Device, EventDelivery, MessageHub, Resource, Scheduler, SystemModel, TraceRecord
from .scl import instantiate_from_scl, parse_scl, serialize_scl, validate_against_model
from .server import AcsiClient, AcsiServer, ServerBuffer
from .values import DataValue, Quality, boolean, enum, float64, int32, text, timestamp

__version__ = "0.1.0"
