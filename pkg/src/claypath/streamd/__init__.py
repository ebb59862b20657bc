from .session import (
    Ack,
    Control,
    EndpointEvent,
    Session,
    SessionError,
    Tick,
)

__all__ = ["Session", "SessionError", "Control", "Ack", "Tick", "EndpointEvent"]
