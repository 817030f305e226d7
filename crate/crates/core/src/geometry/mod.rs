//! Billiard domains, test regions and boundary quadrature.

mod chain;
mod domain;
mod region;
mod segment;

pub use chain::{BoundaryNode, ClosedChain, PolarRule, MIN_PANEL_NODES, PANEL_WAVELENGTHS};
pub use domain::{boundary_quadrature, build_quarter_disk, build_sinai_domain, BilliardDomain, DomainShape};
pub use region::{build_test_region, build_test_region_with, region_at_offset, InterfacePolicy, region_interface_quadrature, Indicator, TestRegion, WholeDomain};
pub use segment::{BoundarySegment, SegmentKind, SegmentRole};

pub type Vec2 = nalgebra::Vector2<f64>;
