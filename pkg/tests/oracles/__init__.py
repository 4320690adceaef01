"""Independent reference implementations used as test oracles.

Nothing here imports the package's numerical code; each oracle recomputes
its quantity the slow, obvious way.
"""
