//! Distributional checks on the soup samplers against exact loop masses.

use loopsoup::analysis::replicate_moments;
use loopsoup::exact::{parity_constrained_mass, total_loop_mass, ParityRule};
use loopsoup::fields::{edge_parities, spin_field, spin_from_parities, winding_number};
use loopsoup::lattice::{DefectStrategy, DiscreteDomain, Face};
use loopsoup::sampler::{SoupMethod, SoupSampler};

const N: u64 = 20_000;

fn within(est: f64, se: f64, target: f64) -> bool {
    (est - target).abs() <= 4.0 * se
}

fn l_domain() -> DiscreteDomain {
    let faces = [(0, 0), (1, 0), (2, 0), (0, 1), (0, 2), (1, 1)].map(|(x, y)| Face::new(x, y));
    DiscreteDomain::from_faces(faces, 1.0).unwrap()
}

#[test]
fn loop_counts_follow_the_loop_measure() {
    let d = l_domain();
    let lambda = 1.5;
    for kappa in [0.0, 0.7] {
        let total = total_loop_mass(&d, kappa).unwrap().value;
        // length-2 loops: one per oriented edge, weight (4+κ)^{-2}/2 each
        let two = d.edge_count() as f64 * 2.0 / (2.0 * (4.0 + kappa).powi(2));
        for method in [SoupMethod::Bridge, SoupMethod::Excursion] {
            let s = SoupSampler::new(&d, kappa, method).unwrap();
            assert!((s.total_mass() - total).abs() < 1e-9 * total);
            let m = replicate_moments(0, N, 2, |r, out| {
                let soup = s.sample(lambda, 21, r)?;
                out[0] = soup.len() as f64;
                out[1] = soup.loops.iter().filter(|l| l.len() == 2).count() as f64;
                Ok(())
            })
            .unwrap();
            let (all, short) = (m[0].estimate(21), m[1].estimate(21));
            assert!(within(all.mean, all.std_error, lambda * total), "{method:?} κ={kappa}: {all:?} vs {}", lambda * total);
            assert!(within(short.mean, short.std_error, lambda * two), "{method:?} κ={kappa}: {short:?} vs {}", lambda * two);
        }
    }
}

#[test]
fn odd_winding_loops_have_the_determinant_mass() {
    let d = DiscreteDomain::square(4, 1.0).unwrap();
    let z = Face::new(1, 2);
    let odd = parity_constrained_mass(&d, &[z], &ParityRule::SumOdd, 0.0).unwrap().value;
    let lambda = 2.0;
    for method in [SoupMethod::Bridge, SoupMethod::Excursion] {
        let s = SoupSampler::new(&d, 0.0, method).unwrap();
        let m = replicate_moments(0, N, 1, |r, out| {
            let soup = s.sample(lambda, 4, r)?;
            out[0] = soup.loops.iter().filter(|l| winding_number(l, z) % 2 != 0).count() as f64;
            Ok(())
        })
        .unwrap();
        let e = m[0].estimate(4);
        assert!(within(e.mean, e.std_error, lambda * odd), "{method:?}: {e:?} vs {}", lambda * odd);
    }
}

#[test]
fn restriction_is_the_subdomain_soup() {
    let big = DiscreteDomain::square(4, 1.0).unwrap();
    let small = DiscreteDomain::rectangle(2, 3, 1.0).unwrap();
    let target = total_loop_mass(&small, 0.0).unwrap().value;
    let s = SoupSampler::new(&big, 0.0, SoupMethod::Auto).unwrap();
    let m = replicate_moments(0, N, 1, |r, out| {
        out[0] = s.sample(1.0, 8, r)?.restricted_to(&small).len() as f64;
        Ok(())
    })
    .unwrap();
    let e = m[0].estimate(8);
    assert!(within(e.mean, e.std_error, target), "{e:?} vs {target}");
}

#[test]
fn spins_from_windings_and_edge_parities_agree() {
    let d = l_domain();
    let s = SoupSampler::new(&d, 0.0, SoupMethod::Auto).unwrap();
    let lines: Vec<_> = d.faces().iter().map(|&f| d.defect_line(f, DefectStrategy::Shortest).unwrap()).collect();
    for r in 0..300 {
        let soup = s.sample(3.0, 2, r).unwrap();
        let spins = spin_field(&d, &soup).values;
        let parities = edge_parities(&d, &soup);
        for (spin, line) in spins.iter().zip(&lines) {
            assert_eq!(*spin, spin_from_parities(&parities, line));
        }
    }
}

#[test]
fn replicates_do_not_depend_on_sampling_order() {
    let d = DiscreteDomain::square(3, 1.0).unwrap();
    let s = SoupSampler::new(&d, 0.0, SoupMethod::Excursion).unwrap();
    let forward: Vec<_> = (0..20).map(|r| s.sample(1.0, 9, r).unwrap().loops).collect();
    let backward: Vec<_> = (0..20).rev().map(|r| s.sample(1.0, 9, r).unwrap().loops).collect();
    assert!(forward.iter().eq(backward.iter().rev()));
    assert_ne!(forward[0], forward[1]);
}

#[test]
fn massive_box_field_is_stable_in_the_box_size() {
    let (kappa, lambda, n) = (1.0, 0.5, 4000);
    let centre = |l: u32| -> loopsoup::analysis::Estimate {
        let d = DiscreteDomain::rectangle(l, l, 1.0).unwrap();
        let s = SoupSampler::new(&d, kappa, SoupMethod::Excursion).unwrap();
        let mid = d.require_face(Face::new(l as i32 / 2, l as i32 / 2)).unwrap();
        let m = replicate_moments(0, n, 1, |r, out| {
            out[0] = spin_field(&d, &s.sample(lambda, 5, r)?).values[mid] as f64;
            Ok(())
        })
        .unwrap();
        m[0].estimate(5)
    };
    let (small, large) = (centre(8), centre(16));
    let se = small.std_error.hypot(large.std_error);
    assert!((small.mean - large.mean).abs() <= 3.0 * se, "{small:?} vs {large:?}");

    // two deep-bulk faces of the larger box
    let d = DiscreteDomain::rectangle(16, 16, 1.0).unwrap();
    let s = SoupSampler::new(&d, kappa, SoupMethod::Excursion).unwrap();
    let (a, b) = (d.require_face(Face::new(7, 7)).unwrap(), d.require_face(Face::new(8, 9)).unwrap());
    let m = replicate_moments(0, n, 2, |r, out| {
        let spins = spin_field(&d, &s.sample(lambda, 6, r)?).values;
        out[0] = spins[a] as f64;
        out[1] = spins[b] as f64;
        Ok(())
    })
    .unwrap();
    let (ea, eb) = (m[0].estimate(6), m[1].estimate(6));
    assert!((ea.mean - eb.mean).abs() <= 3.0 * ea.std_error.hypot(eb.std_error), "{ea:?} vs {eb:?}");
}
