"""Reference external-model host for the longcast bridge protocol.

A pure model shim: rows arrive fully featurized over stdin, predictions
leave over stdout, one JSON object per line. No feature logic lives here.
"""

__version__ = "0.1.0"
