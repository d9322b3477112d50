"""Free-boundary minimal hypersurfaces in the unit ball.

Exact surfaces (equatorial disk, critical catenoid, rotational minimal
annuli), residual checks of the elliptic and boundary identities they
satisfy, and a discrete area-minimisation solver for triangle meshes with
boundary on the unit sphere.
"""

__version__ = "0.1.0"
