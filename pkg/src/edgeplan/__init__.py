"""Capacity planning for mobile computation offloading through leased edge resources.

The package models a network operator that leases wireless channels at a set
of base stations plus a slice of an edge server, and decides how much of each
to lease so that mobile devices can offload compute tasks under a budget and
per-class delay requirements.  It contains the analytic building blocks
(channel upload-time distributions, Erlang blocking, edge-queue delay
distributions, device power models), two grid-search planners built on a
small convex subproblem, and a discrete-event simulator used to validate the
analytic predictions.
"""

__version__ = "0.1.0"
