"""Gray-labeled signal sets (8-AM, 16-QAM) and their bit-subset partitions."""

from dataclasses import dataclass, field

import numpy as np

__all__ = ["Constellation", "build_8am", "build_16qam", "bit_subset", "from_name"]


@dataclass(frozen=True)
class Constellation:
    """A unit-energy signal set with an m-bit Gray label per point.

    Bit index 1 is the leftmost label bit.  ``is_real`` marks one-dimensional
    (AM) sets whose channel noise is real-valued.
    """

    name: str
    points: np.ndarray          # complex, shape (2^m,)
    labels: tuple               # m-char '0'/'1' strings, one per point
    m: int
    is_real: bool
    scale: float = 1.0          # grid spacing d; points/scale sits on integer levels
    _label_to_idx: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.complex128)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(
            self, "_label_to_idx", {lab: k for k, lab in enumerate(self.labels)}
        )

    @property
    def size(self):
        return self.points.size

    @property
    def levels(self):
        """Points on the integer-level axis u = y/scale (the LLR-function axis)."""
        return self.points / self.scale

    def average_energy(self):
        return float(np.mean(np.abs(self.points) ** 2))

    def bit_values(self, i):
        """0/1 array of label bit i (1-based) for every point."""
        self._check_bit(i)
        return np.array([int(lab[i - 1]) for lab in self.labels])

    def subset_indices(self, i, w):
        """Indices of points whose label has bit i equal to w."""
        if w not in (0, 1):
            raise ValueError(f"bit value must be 0 or 1, got {w}")
        return np.flatnonzero(self.bit_values(i) == w)

    def point_for_label(self, label):
        return self.points[self._label_to_idx[label]]

    def map_bits(self, bits):
        """Map a flat 0/1 array (length divisible by m) to symbols."""
        bits = np.asarray(bits).reshape(-1, self.m)
        idx = bits.dot(1 << np.arange(self.m - 1, -1, -1))
        order = np.empty(self.size, dtype=int)
        for k, lab in enumerate(self.labels):
            order[int(lab, 2)] = k
        return self.points[order[idx]]

    def _check_bit(self, i):
        if not 1 <= i <= self.m:
            raise IndexError(f"bit index {i} out of range 1..{self.m}")


def bit_subset(const, i, w):
    """Points of ``const`` whose label bit i (1-based) equals w."""
    return const.points[const.subset_indices(i, w)]


# Per-axis Gray map for the magnitude bits.  For 8-AM the (bit2, bit3) pair
# runs (0,1),(0,0),(1,0),(1,1) over magnitudes 1,3,5,7 so that bit 2 marks
# the outer pair and bit 3 alternates with period two; this is the unique
# reflected-Gray assignment (up to column complement) whose bit-2 LLR is a
# downward tent peaking at y = 0 and whose bit-3 LLR is negative at both
# y = 0 and large |y|.
_AM8_MAG_BITS = {1: "01", 3: "00", 5: "10", 7: "11"}
_AM4_MAG_BITS = {1: "1", 3: "0"}


def build_8am():
    """8-AM at {±1,±3,±5,±7}/sqrt(21) with sign/magnitude Gray labels.

    Bit 1 is the sign bit (0 on the positive side), bit 2 separates inner
    from outer magnitudes, bit 3 is the inner-magnitude bit.
    """
    d = 1.0 / np.sqrt(21.0)
    levels = np.array([-7, -5, -3, -1, 1, 3, 5, 7], dtype=float)
    points = levels * d
    labels = []
    for lv in levels:
        sign_bit = "0" if lv > 0 else "1"
        labels.append(sign_bit + _AM8_MAG_BITS[int(abs(lv))])
    return Constellation("8am", points.astype(complex), tuple(labels), 3, True, scale=d)


def build_16qam():
    """16-QAM on the {±1,±3}/sqrt(10) grid with product Gray labeling.

    Bits (1,2) are the sign/magnitude pair of Re{y}, bits (3,4) the same
    pair of Im{y}, so bit-3/4 LLR functions equal bit-1/2 functions with
    real and imaginary parts swapped.
    """
    d = 1.0 / np.sqrt(10.0)
    levels = np.array([-3, -1, 1, 3], dtype=float)
    points = []
    labels = []
    for lre in levels:
        for lim in levels:
            points.append((lre + 1j * lim) * d)
            lab_re = ("0" if lre > 0 else "1") + _AM4_MAG_BITS[int(abs(lre))]
            lab_im = ("0" if lim > 0 else "1") + _AM4_MAG_BITS[int(abs(lim))]
            labels.append(lab_re + lab_im)
    return Constellation("16qam", np.array(points), tuple(labels), 4, False, scale=d)


_BUILDERS = {"8am": build_8am, "16qam": build_16qam}


def from_name(name):
    try:
        return _BUILDERS[name.lower()]()
    except KeyError:
        raise ValueError(f"unknown constellation {name!r}; choose from {sorted(_BUILDERS)}")
