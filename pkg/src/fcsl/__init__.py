"""Joint uplink/downlink CSI acquisition testbed."""

__version__ = "0.1.0"
