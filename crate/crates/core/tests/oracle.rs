mod common;

use common::{coords, oracle::pattern_masses};
use loopsoup::exact::{enumerated_pattern_masses, pattern_from, total_loop_mass, TwistedDeterminants};
use loopsoup::lattice::{fixed_polyominoes, DefectStrategy, DiscreteDomain, Face};

#[test]
fn unit_square_matches_the_cycle_series() {
    // a 4-cycle has tr(P^t) = 2 · 2^{-t} for even t
    let o = pattern_masses(&[(0, 0)], &[(0, 0)], 40);
    let series: f64 = (1..=20).map(|k| 2.0 * 0.5f64.powi(2 * k) / (2 * k) as f64).sum();
    assert!((o.patterns[0] + o.patterns[1] - series).abs() < 1e-15);
    assert!((o.patterns[0] + o.patterns[1] - (4.0f64 / 3.0).ln()).abs() <= o.tail_bound);
}

#[test]
fn polyomino_counts_match_the_known_sequence() {
    let counts: Vec<usize> = (1..=6).map(|k| fixed_polyominoes(k).iter().filter(|p| p.len() == k).count()).collect();
    assert_eq!(counts, [1, 2, 6, 19, 63, 216]);
}

#[test]
fn determinants_match_the_oracle_on_every_small_polyomino() {
    let mut checked = 0;
    for faces in fixed_polyominoes(5) {
        let d = DiscreteDomain::from_faces(faces.clone(), 1.0).unwrap();
        let lds = TwistedDeterminants::new(&d, &faces, 0.0, DefectStrategy::default()).unwrap().all().unwrap();
        let o = pattern_masses(&coords(&faces), &coords(&faces), 64);
        for p in 0..lds.len() {
            let err = (pattern_from(&lds, p) - o.patterns[p]).abs();
            assert!(err <= o.tail_bound + 1e-12, "{faces:?} pattern {p}: {err} > {}", o.tail_bound);
        }
        checked += 1;
    }
    assert_eq!(checked, 1 + 2 + 6 + 19 + 63);
}

#[test]
fn tracked_subsets_and_defect_strategies() {
    let d = DiscreteDomain::rectangle(3, 2, 1.0).unwrap();
    let all = coords(d.faces());
    let tracked = [Face::new(0, 0), Face::new(2, 1), Face::new(1, 0)];
    let o = pattern_masses(&all, &coords(&tracked), 80);
    for strategy in [DefectStrategy::default(), DefectStrategy::Shortest] {
        let lds = TwistedDeterminants::new(&d, &tracked, 0.0, strategy).unwrap().all().unwrap();
        for p in 0..8 {
            assert!((pattern_from(&lds, p) - o.patterns[p]).abs() <= o.tail_bound + 1e-12);
        }
    }
    let total = total_loop_mass(&d, 0.0).unwrap().value;
    assert!((o.patterns.iter().sum::<f64>() - total).abs() <= o.tail_bound + 1e-12);
}

#[test]
fn library_enumerator_agrees_with_the_oracle() {
    for faces in fixed_polyominoes(4) {
        let d = DiscreteDomain::from_faces(faces.clone(), 1.0).unwrap();
        let lib = enumerated_pattern_masses(&d, &faces, 30).unwrap();
        let o = pattern_masses(&coords(&faces), &coords(&faces), 30);
        for (a, b) in lib.patterns.iter().zip(&o.patterns) {
            assert!((a - b).abs() < 1e-14, "{faces:?}");
        }
    }
}
