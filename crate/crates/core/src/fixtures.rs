//! Bundled geometry: 94 mainland French départements as planar centroids
//! (km, equirectangular about 46.5°N) and the eight Île-de-France units used
//! as the planted cluster.

use crate::io::{parse_locations, read_id_list};
use crate::trajectory::Location;

pub const DEPARTEMENTS_CSV: &str = include_str!("../data/departements.csv");
pub const CLUSTER_IDF_CSV: &str = include_str!("../data/cluster_idf.csv");

pub fn departements() -> Vec<Location> {
    parse_locations(DEPARTEMENTS_CSV.as_bytes(), "departements.csv").expect("bundled geometry parses")
}

pub fn cluster_idf() -> Vec<String> {
    read_id_list(CLUSTER_IDF_CSV).expect("bundled cluster parses")
}
