"""wsnsim: discrete-event WSN simulator with TCP congestion-control variants
and proxy-node aggregation."""

__version__ = "0.1.0"
