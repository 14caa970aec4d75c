"""Randomized virtual tissue phantoms: lesion sampling, scatterer placement,
and ground-truth mask rasterization.

A phantom is a 3-D slab of uniformly scattered point reflectors with zero or
more non-overlapping lesions. Hyperechoic lesions scale the reflectivity of
the scatterers they contain by an integer factor ``k``; anechoic lesions
zero it. Everything is a pure function of (seed, config).
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .validation import check_seed, rng_for

LABEL_BACKGROUND = 0
LABEL_HYPERECHOIC = 1
LABEL_ANECHOIC = 2

# Substream ids for rng_for(); lesion sampling and scatterer placement must
# draw from independent streams of the same seed.
_STREAM_SPEC = 0
_STREAM_SCATTER = 1


class PlacementError(RuntimeError):
    """Rejection sampling could not place all lesions without overlap."""


@dataclass(frozen=True)
class RegionExtent:
    """Axis-aligned phantom slab in transducer coordinates (millimeters).

    Lateral spans the transducer face, axial is depth from the surface, and
    elevation is the out-of-plane slab thickness centered on zero.
    """

    lateral_min_mm: float = -20.0
    lateral_max_mm: float = 20.0
    axial_min_mm: float = 30.0
    axial_max_mm: float = 90.0
    # Thick enough that the elevation beam never runs out of scatterers;
    # see TransducerConfig on speckle statistics.
    elevation_thickness_mm: float = 12.0

    def __post_init__(self):
        if not self.lateral_min_mm < self.lateral_max_mm:
            raise ValueError("lateral_min_mm must be < lateral_max_mm")
        if not self.axial_min_mm < self.axial_max_mm:
            raise ValueError("axial_min_mm must be < axial_max_mm")
        if not self.elevation_thickness_mm > 0:
            raise ValueError("elevation_thickness_mm must be > 0")

    @property
    def lateral_span_mm(self) -> float:
        return self.lateral_max_mm - self.lateral_min_mm

    @property
    def axial_span_mm(self) -> float:
        return self.axial_max_mm - self.axial_min_mm

    @property
    def volume_mm3(self) -> float:
        return self.lateral_span_mm * self.axial_span_mm * self.elevation_thickness_mm


@dataclass(frozen=True)
class Lesion:
    """One circular or elliptical lesion in the lateral/axial plane.

    ``k`` is the integer reflectivity multiplier of a hyperechoic lesion;
    anechoic lesions zero their scatterers regardless of ``k``.
    """

    shape: str  # "circle" | "ellipse"
    center_lateral_mm: float
    center_axial_mm: float
    echogenicity: str  # "hyperechoic" | "anechoic"
    k: int = 1
    radius_mm: float = 0.0
    semi_major_mm: float = 0.0
    semi_minor_mm: float = 0.0
    orientation_rad: float = 0.0

    def __post_init__(self):
        if self.shape not in ("circle", "ellipse"):
            raise ValueError(f"unknown lesion shape {self.shape!r}")
        if self.echogenicity not in ("hyperechoic", "anechoic"):
            raise ValueError(f"unknown echogenicity {self.echogenicity!r}")
        if self.shape == "circle":
            if not 1.0 <= self.radius_mm <= 3.0:
                raise ValueError(f"circle radius must be in [1, 3] mm, got {self.radius_mm}")
        else:
            if not 5.0 <= self.semi_major_mm <= 9.0:
                raise ValueError(f"semi-major axis must be in [5, 9] mm, got {self.semi_major_mm}")
            if not 1.0 <= self.semi_minor_mm <= 5.0:
                raise ValueError(f"semi-minor axis must be in [1, 5] mm, got {self.semi_minor_mm}")
        if self.echogenicity == "hyperechoic":
            if not (isinstance(self.k, (int, np.integer)) and 1 <= self.k <= 10):
                raise ValueError(f"hyperechoic k must be an integer in [1, 10], got {self.k!r}")

    @property
    def bounding_radius_mm(self) -> float:
        return self.radius_mm if self.shape == "circle" else self.semi_major_mm

    @property
    def label(self) -> int:
        return LABEL_HYPERECHOIC if self.echogenicity == "hyperechoic" else LABEL_ANECHOIC

    @property
    def amplitude_factor(self) -> float:
        return 0.0 if self.echogenicity == "anechoic" else float(self.k)

    def contains(self, lateral_mm, axial_mm) -> np.ndarray:
        """Vectorized membership test for points in the lateral/axial plane."""
        dx = np.asarray(lateral_mm, dtype=np.float64) - self.center_lateral_mm
        dz = np.asarray(axial_mm, dtype=np.float64) - self.center_axial_mm
        if self.shape == "circle":
            return dx * dx + dz * dz < self.radius_mm**2
        # Rotated implicit equation: project onto the ellipse axes.
        c, s = math.cos(self.orientation_rad), math.sin(self.orientation_rad)
        u = c * dx + s * dz
        v = -s * dx + c * dz
        return (u / self.semi_major_mm) ** 2 + (v / self.semi_minor_mm) ** 2 < 1.0


@dataclass(frozen=True)
class PhantomSpec:
    """Complete, re-derivable description of one virtual phantom."""

    extent: RegionExtent = field(default_factory=RegionExtent)
    lesions: tuple[Lesion, ...] = ()
    scatterer_density_per_mm3: float = 4.0
    seed: int = 0

    def __post_init__(self):
        if not self.scatterer_density_per_mm3 > 0:
            raise ValueError("scatterer_density_per_mm3 must be > 0")
        check_seed(self.seed)

    def to_dict(self) -> dict:
        return {
            "format_version": 1,
            "extent": dataclasses.asdict(self.extent),
            "lesions": [dataclasses.asdict(les) for les in self.lesions],
            "scatterer_density_per_mm3": self.scatterer_density_per_mm3,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PhantomSpec":
        return cls(
            extent=RegionExtent(**d["extent"]),
            lesions=tuple(Lesion(**les) for les in d["lesions"]),
            scatterer_density_per_mm3=d["scatterer_density_per_mm3"],
            seed=d["seed"],
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "PhantomSpec":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class GenerationConfig:
    """Sampling ranges for randomized phantom specs.

    Defaults follow the virtual-transducer setup: lesion centers drawn over
    the full slab, circle radii 1-3 mm, ellipse semi-axes 5-9 / 1-5 mm,
    integer contrast k in [min_k, 10]. ``min_k`` stays at 1 by default even
    though k=1 renders a "hyperechoic" lesion statistically identical to
    background; raise it for guaranteed contrast.
    """

    extent: RegionExtent = field(default_factory=RegionExtent)
    scatterer_density_per_mm3: float = 4.0
    lesion_count_min: int = 1
    lesion_count_max: int = 6
    circle_prob: float = 0.5
    hyperechoic_prob: float = 0.5
    circle_radius_min_mm: float = 1.0
    circle_radius_max_mm: float = 3.0
    ellipse_semi_major_min_mm: float = 5.0
    ellipse_semi_major_max_mm: float = 9.0
    ellipse_semi_minor_min_mm: float = 1.0
    ellipse_semi_minor_max_mm: float = 5.0
    min_k: int = 1
    max_k: int = 10
    max_placement_attempts: int = 1000

    def __post_init__(self):
        if self.lesion_count_min < 0 or self.lesion_count_max < self.lesion_count_min:
            raise ValueError("lesion count range must satisfy 0 <= min <= max")
        for lo, hi, what in (
            (self.circle_radius_min_mm, self.circle_radius_max_mm, "circle radius"),
            (self.ellipse_semi_major_min_mm, self.ellipse_semi_major_max_mm, "semi-major"),
            (self.ellipse_semi_minor_min_mm, self.ellipse_semi_minor_max_mm, "semi-minor"),
        ):
            if not 0 < lo <= hi:
                raise ValueError(f"{what} range must satisfy 0 < min <= max")
        if not 1 <= self.min_k <= self.max_k:
            raise ValueError("k range must satisfy 1 <= min_k <= max_k")
        if not 0.0 <= self.circle_prob <= 1.0 or not 0.0 <= self.hyperechoic_prob <= 1.0:
            raise ValueError("probabilities must be in [0, 1]")
        if self.max_placement_attempts < 1:
            raise ValueError("max_placement_attempts must be >= 1")


@dataclass(frozen=True)
class ScattererField:
    """Point scatterers: positions (lateral, elevation, axial) mm, reflectivities."""

    positions: np.ndarray  # (n, 3) float64
    amplitudes: np.ndarray  # (n,) float64

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.float64).reshape(-1, 3)
        amp = np.asarray(self.amplitudes, dtype=np.float64).reshape(-1)
        if pos.shape[0] != amp.shape[0]:
            raise ValueError(
                f"positions ({pos.shape[0]}) and amplitudes ({amp.shape[0]}) length mismatch"
            )
        if pos.size and not (np.all(np.isfinite(pos)) and np.all(np.isfinite(amp))):
            raise ValueError("scatterer positions and amplitudes must be finite")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "amplitudes", amp)

    def __len__(self) -> int:
        return self.positions.shape[0]

    @property
    def lateral_mm(self) -> np.ndarray:
        return self.positions[:, 0]

    @property
    def elevation_mm(self) -> np.ndarray:
        return self.positions[:, 1]

    @property
    def axial_mm(self) -> np.ndarray:
        return self.positions[:, 2]

    def concatenate(self, other: "ScattererField") -> "ScattererField":
        return ScattererField(
            np.concatenate([self.positions, other.positions]),
            np.concatenate([self.amplitudes, other.amplitudes]),
        )


@dataclass(frozen=True)
class ClassMask:
    """Background / hyperechoic / anechoic label raster over a known extent."""

    labels: np.ndarray  # (height, width) uint8
    extent: RegionExtent = field(default_factory=RegionExtent)

    def __post_init__(self):
        arr = np.asarray(self.labels)
        if arr.ndim != 2:
            raise ValueError(f"labels must be 2-D, got shape {arr.shape}")
        if not np.isin(arr, (LABEL_BACKGROUND, LABEL_HYPERECHOIC, LABEL_ANECHOIC)).all():
            raise ValueError("labels must be in {0, 1, 2}")
        object.__setattr__(self, "labels", arr.astype(np.uint8))

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    def pixel_centers_mm(self) -> tuple[np.ndarray, np.ndarray]:
        """(axial, lateral) center coordinates of every row / column."""
        ext = self.extent
        ax = ext.axial_min_mm + (np.arange(self.height) + 0.5) * ext.axial_span_mm / self.height
        lat = (
            ext.lateral_min_mm
            + (np.arange(self.width) + 0.5) * ext.lateral_span_mm / self.width
        )
        return ax, lat

    def pixel_of(self, lateral_mm: float, axial_mm: float) -> tuple[int, int]:
        """(row, col) of the pixel containing a lateral/axial point."""
        ext = self.extent
        col = int((lateral_mm - ext.lateral_min_mm) / ext.lateral_span_mm * self.width)
        row = int((axial_mm - ext.axial_min_mm) / ext.axial_span_mm * self.height)
        return (
            min(max(row, 0), self.height - 1),
            min(max(col, 0), self.width - 1),
        )

    def one_hot(self) -> np.ndarray:
        """(height, width, 3) one-hot view of the class raster."""
        return np.eye(3, dtype=np.uint8)[self.labels]


def _separated(center, bounding, placed) -> bool:
    for les in placed:
        dx = center[0] - les.center_lateral_mm
        dz = center[1] - les.center_axial_mm
        if math.hypot(dx, dz) <= bounding + les.bounding_radius_mm:
            return False
    return True


def sample_phantom_spec(seed: int, config: GenerationConfig | None = None) -> PhantomSpec:
    """Draw one randomized phantom spec.

    Lesion shape, size, echogenicity, and contrast are sampled first; centers
    are then rejection-sampled uniformly over the slab until the new lesion's
    bounding circle clears every previously placed one. Deterministic for a
    given (seed, config).

    Raises
    ------
    PlacementError
        If a center cannot be placed within ``config.max_placement_attempts``.
    """
    config = config or GenerationConfig()
    rng = rng_for(seed, _STREAM_SPEC)
    ext = config.extent
    n_lesions = int(rng.integers(config.lesion_count_min, config.lesion_count_max + 1))
    lesions: list[Lesion] = []
    for i in range(n_lesions):
        is_circle = rng.random() < config.circle_prob
        if is_circle:
            size = {
                "radius_mm": float(
                    rng.uniform(config.circle_radius_min_mm, config.circle_radius_max_mm)
                )
            }
            bounding = size["radius_mm"]
        else:
            size = {
                "semi_major_mm": float(
                    rng.uniform(config.ellipse_semi_major_min_mm, config.ellipse_semi_major_max_mm)
                ),
                "semi_minor_mm": float(
                    rng.uniform(config.ellipse_semi_minor_min_mm, config.ellipse_semi_minor_max_mm)
                ),
                "orientation_rad": float(rng.uniform(0.0, math.pi)),
            }
            bounding = size["semi_major_mm"]
        hyper = rng.random() < config.hyperechoic_prob
        k = int(rng.integers(config.min_k, config.max_k + 1)) if hyper else 1

        for attempt in range(config.max_placement_attempts):
            center = (
                float(rng.uniform(ext.lateral_min_mm, ext.lateral_max_mm)),
                float(rng.uniform(ext.axial_min_mm, ext.axial_max_mm)),
            )
            if _separated(center, bounding, lesions):
                break
        else:
            raise PlacementError(
                f"could not place lesion {i + 1}/{n_lesions} without overlap after "
                f"{config.max_placement_attempts} attempts (extent too crowded)"
            )
        lesions.append(
            Lesion(
                shape="circle" if is_circle else "ellipse",
                center_lateral_mm=center[0],
                center_axial_mm=center[1],
                echogenicity="hyperechoic" if hyper else "anechoic",
                k=k,
                **size,
            )
        )
    return PhantomSpec(
        extent=ext,
        lesions=tuple(lesions),
        scatterer_density_per_mm3=config.scatterer_density_per_mm3,
        seed=check_seed(seed),
    )


def place_scatterers(spec: PhantomSpec) -> ScattererField:
    """Fill the phantom with point scatterers.

    The count is Poisson with mean density x slab volume, positions are
    uniform over the slab, and base reflectivities are standard normal.
    Scatterers inside a hyperechoic lesion are scaled by its ``k``; inside
    an anechoic lesion they are zeroed.
    """
    ext = spec.extent
    volume = ext.volume_mm3
    if volume <= 0:
        raise ValueError(f"phantom extent has non-positive volume {volume}")
    rng = rng_for(spec.seed, _STREAM_SCATTER)
    n = int(rng.poisson(spec.scatterer_density_per_mm3 * volume))
    half_elev = ext.elevation_thickness_mm / 2.0
    positions = np.column_stack(
        [
            rng.uniform(ext.lateral_min_mm, ext.lateral_max_mm, n),
            rng.uniform(-half_elev, half_elev, n),
            rng.uniform(ext.axial_min_mm, ext.axial_max_mm, n),
        ]
    )
    amplitudes = rng.standard_normal(n)
    # Lesions are pairwise disjoint by construction, so application order
    # does not matter.
    for les in spec.lesions:
        inside = les.contains(positions[:, 0], positions[:, 2])
        amplitudes[inside] *= les.amplitude_factor
    return ScattererField(positions, amplitudes)


def rasterize_mask(spec: PhantomSpec, width: int = 388, height: int = 388) -> ClassMask:
    """Rasterize the ground-truth class mask over the full slab extent.

    A pixel is labeled by the lesion containing its center, in millimeter
    coordinates; lesions straddling the border rasterize partially. The
    default 388x388 matches the segmentation network's output geometry.
    """
    if width <= 0 or height <= 0:
        raise ValueError(f"mask dimensions must be positive, got {width}x{height}")
    labels = np.zeros((height, width), dtype=np.uint8)
    mask = ClassMask(labels, spec.extent)
    ax, lat = mask.pixel_centers_mm()
    lat_grid, ax_grid = np.meshgrid(lat, ax)
    for les in spec.lesions:
        labels[les.contains(lat_grid, ax_grid)] = les.label
    return ClassMask(labels, spec.extent)
