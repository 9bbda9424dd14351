"""Packet-level discrete-event simulator for TCP/UDP over a mmWave cellular link."""

__version__ = "0.1.0"
