//! Rigid-object placement on a support plane: rotation geometry and
//! losses, mesh processing, stable-placement enumeration and settling,
//! placement-type clustering, evaluation metrics and regrasp planning.

pub mod cluster;
pub mod losses;
pub mod meshgeo;
pub mod metrics;
pub mod placements;
pub mod planar;
pub mod regrasp;
pub mod rotgeo;

pub use rotgeo::{Mat3, Rotation3, Vec3};

/// Serde adapter writing a `Vec3` as a plain `[x, y, z]` array.
pub mod vec3_array {
    use crate::rotgeo::Vec3;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Vec3, s: S) -> Result<S::Ok, S::Error> {
        [v.x, v.y, v.z].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec3, D::Error> {
        let [x, y, z] = <[f64; 3]>::deserialize(d)?;
        Ok(Vec3::new(x, y, z))
    }
}
