use cfs_core::DiscreteSystem;

/// Two points in a two-dimensional Hilbert space, one unit of time apart.
pub const TWO_POINT_JSON: &str = include_str!("../data/two_point.json");

/// The bundled demo system used when no system file or generator is given.
pub fn demo_system() -> DiscreteSystem {
    DiscreteSystem::from_json(TWO_POINT_JSON).expect("bundled demo system is valid")
}
