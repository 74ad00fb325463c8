#![allow(dead_code)]

pub mod oracle;

use loopsoup::lattice::Face;

pub fn coords(faces: &[Face]) -> Vec<(i32, i32)> {
    faces.iter().map(|f| (f.x, f.y)).collect()
}
