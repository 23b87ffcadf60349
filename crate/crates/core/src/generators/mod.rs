//! Deterministic parametric mesh generators.
//!
//! Every generator is built from axis-aligned (or sheared/tilted) cuboids,
//! except the vase, which is a surface of revolution. Objects rest on the
//! `y = 0` plane and are centered on `x = z = 0`.

mod chair;
mod mesh;
mod schema;
mod table;
mod vase;

pub use mesh::{TriangleMesh, Vec3};
pub(crate) use mesh::{add, cross, dot, norm, scale, sub};
pub use schema::{GeneratorSchema, ParamKind, ParamSpec, ParamVector};

use crate::error::{Error, Result};

const GENERATORS: [&str; 3] = ["chair", "table", "vase"];

pub fn list_generators() -> Vec<String> {
    GENERATORS.iter().map(|s| s.to_string()).collect()
}

pub fn schema(generator_id: &str) -> Result<GeneratorSchema> {
    match generator_id {
        "chair" => Ok(chair::schema()),
        "table" => Ok(table::schema()),
        "vase" => Ok(vase::schema()),
        other => Err(Error::NotFound(format!("generator `{other}`"))),
    }
}

pub fn generate(schema: &GeneratorSchema, params: &ParamVector) -> Result<TriangleMesh> {
    schema.validate(params)?;
    let mesh = match schema.generator_id.as_str() {
        "chair" => chair::build(schema, params),
        "table" => table::build(schema, params),
        "vase" => vase::build(schema, params),
        other => return Err(Error::NotFound(format!("generator `{other}`"))),
    };
    debug_assert!(mesh.validate().is_ok());
    Ok(mesh)
}

pub fn sample_params(schema: &GeneratorSchema, seed: u64) -> ParamVector {
    schema.sample_params(seed)
}

/// Whether mirroring the object about `x = 0` leaves it unchanged, which makes
/// horizontal image flips label-preserving.
pub fn is_mirror_symmetric(generator_id: &str) -> bool {
    // all three are symmetric by construction; see the generator tests
    GENERATORS.contains(&generator_id)
}
