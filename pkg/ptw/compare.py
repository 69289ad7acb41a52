import numpy as np

from ptw.tools import require


class FieldCompare(object):
    """Comparison of two nodal fields on the same grid.

    Attributes:
        difference (ndarray): target - origin, shape (d, M).
        tol (float): Slack allowed by the ordering check.

    Examples:
        Comparisons are usually created through the subtraction interface of
        the compared objects:

        >>> compare = refined_profile - profile
        >>> compare.sup_norm

        Ordering of two solutions started from ordered data:

        >>> FieldCompare(lower.u, upper.u).is_ordered
        True
    """

    def __init__(self, origin, target, tol=0.0):
        """Create a FieldCompare.

        Args:
            origin (ndarray): Reference field.
            target (ndarray): Field compared against origin.
            tol (float, optional): Ordering slack. Default is 0.
        """
        origin = np.asarray(origin, dtype=float)
        target = np.asarray(target, dtype=float)
        require(origin.shape == target.shape, "Compared fields differ in shape")
        self.difference = target - origin
        self.tol = float(tol)

    def __repr__(self):
        return f"FieldCompare(sup_norm={self.sup_norm:.3e})"

    @property
    def sup_norm(self):
        return float(np.abs(self.difference).max()) if self.difference.size else 0.0

    @property
    def is_ordered(self):
        """Whether target >= origin - tol at every node."""
        return bool(np.all(self.difference >= -self.tol))

    @property
    def violations(self):
        """Flat (component, node) indices where target < origin - tol."""
        return np.argwhere(self.difference.reshape(len(self.difference), -1) < -self.tol)

    @property
    def component_norms(self):
        """Sup norm of the difference per component."""
        flat = np.abs(self.difference).reshape(len(self.difference), -1)
        return flat.max(axis=1)


class ProfileCompare(FieldCompare):
    """Comparison of two wave profiles on their common axial nodes.

    Both profiles must share h_r, r_max and the cross-section grid; the left
    boundaries may differ by a multiple of h_r.

    Attributes:
        offset (int): Axial index of the origin's first node in the target.
        common (int): Number of common axial nodes.
    """

    def __init__(self, origin, target, tol=0.0):
        require(
            np.isclose(origin.grid.h_r, target.grid.h_r)
            and origin.grid.cross_points == target.grid.cross_points,
            "Profiles are on incompatible grids",
        )
        shift = (origin.grid.a - target.grid.a) / target.grid.h_r
        require(abs(shift - round(shift)) <= 1e-6, "Left boundaries are not aligned")
        self.offset = int(round(shift))
        if self.offset >= 0:
            start_origin, start_target = 0, self.offset
        else:
            start_origin, start_target = -self.offset, 0
        self.common = min(
            origin.grid.n_r - start_origin, target.grid.n_r - start_target
        )
        require(self.common > 0, "Profiles have no common nodes")
        super().__init__(
            origin.values[:, start_origin:start_origin + self.common],
            target.values[:, start_target:start_target + self.common],
            tol=tol,
        )

    def __repr__(self):
        return f"ProfileCompare(common={self.common}, sup_norm={self.sup_norm:.3e})"
