use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use crate::key::VoxelKey;

/// Neighbourhood used when propagating distances.
///
/// `C24` is faces, edges and two-step faces (all offsets with Manhattan
/// length at most 2); `C32` is `C26` plus the two-step faces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum Connectivity {
    C6,
    C18,
    #[default]
    C24,
    C26,
    C32,
}

impl Connectivity {
    pub const ALL: [Connectivity; 5] = [
        Connectivity::C6,
        Connectivity::C18,
        Connectivity::C24,
        Connectivity::C26,
        Connectivity::C32,
    ];

    pub fn degree(self) -> usize {
        match self {
            Connectivity::C6 => 6,
            Connectivity::C18 => 18,
            Connectivity::C24 => 24,
            Connectivity::C26 => 26,
            Connectivity::C32 => 32,
        }
    }

    pub fn offsets(self) -> &'static [VoxelKey] {
        static TABLES: OnceLock<[Vec<VoxelKey>; 5]> = OnceLock::new();
        let tables = TABLES.get_or_init(|| Connectivity::ALL.map(build_offsets));
        let i = Connectivity::ALL.iter().position(|&c| c == self).unwrap();
        &tables[i]
    }
}

fn build_offsets(c: Connectivity) -> Vec<VoxelKey> {
    let mut faces = Vec::new();
    let mut edges = Vec::new();
    let mut corners = Vec::new();
    for x in -1..=1 {
        for y in -1..=1 {
            for z in -1..=1 {
                let k = VoxelKey::new(x, y, z);
                match x.abs() + y.abs() + z.abs() {
                    1 => faces.push(k),
                    2 => edges.push(k),
                    3 => corners.push(k),
                    _ => {}
                }
            }
        }
    }
    let two_step: Vec<VoxelKey> = faces.iter().map(|f| VoxelKey::new(2 * f.x, 2 * f.y, 2 * f.z)).collect();
    let mut out = faces;
    if c != Connectivity::C6 {
        out.extend(edges);
    }
    if matches!(c, Connectivity::C26 | Connectivity::C32) {
        out.extend(corners);
    }
    if matches!(c, Connectivity::C24 | Connectivity::C32) {
        out.extend(two_step);
    }
    out
}

impl fmt::Display for Connectivity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "C{}", self.degree())
    }
}

impl FromStr for Connectivity {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let digits = s.trim().trim_start_matches(['C', 'c']);
        match digits {
            "6" => Ok(Connectivity::C6),
            "18" => Ok(Connectivity::C18),
            "24" => Ok(Connectivity::C24),
            "26" => Ok(Connectivity::C26),
            "32" => Ok(Connectivity::C32),
            _ => Err(format!("unknown connectivity '{s}'")),
        }
    }
}
