"""Six-seat Texas Hold'em table: engine, wire protocol, server and tooling."""

__version__ = "0.1.0"
