use loopsoup::analysis::Estimate;
use loopsoup::io::{read_loops_jsonl, read_results_csv, write_face_field, write_loops_jsonl, write_results_csv, write_vertex_field, FieldValues, ResultRow};
use loopsoup::lattice::{DiscreteDomain, Site, Step};
use loopsoup::sampler::{sample_loop_soup, LatticeLoop};

#[test]
fn loops_round_trip_through_json_lines() {
    let d = DiscreteDomain::rectangle(5, 3, 0.5).unwrap();
    let soup = sample_loop_soup(&d, 4.0, 0.0, 1).unwrap();
    assert!(!soup.is_empty());
    let mut buf = Vec::new();
    write_loops_jsonl(&mut buf, &soup.loops).unwrap();
    assert_eq!(buf.iter().filter(|&&b| b == b'\n').count(), soup.len());
    assert_eq!(read_loops_jsonl(&buf[..]).unwrap(), soup.loops);
}

#[test]
fn malformed_loops_are_rejected() {
    assert!(read_loops_jsonl(&br#"{"root":[0,0],"steps":"EX"}"#[..]).is_err());
    // not closed
    assert!(read_loops_jsonl(&br#"{"root":[0,0],"steps":"EN"}"#[..]).is_err());
    let ok = read_loops_jsonl(&b"\n{\"root\":[1,2],\"steps\":\"NESW\"}\n\n"[..]).unwrap();
    assert_eq!(ok, vec![LatticeLoop::new(Site::new(1, 2), vec![Step::North, Step::East, Step::South, Step::West]).unwrap()]);
}

#[test]
fn results_round_trip_through_csv() {
    let e = Estimate { mean: 0.125, std_error: 1e-3, n: 500, seed: 4 };
    let rows = vec![
        ResultRow::exact("x", "value", "a=1;b=two".into(), std::f64::consts::PI),
        ResultRow::estimate("x", "mc", "faces=1,1 2,2".into(), &e),
    ];
    let mut buf = Vec::new();
    write_results_csv(&mut buf, &rows).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("experiment,quantity,params,value,stderr,n,seed\n"));
    assert_eq!(read_results_csv(&buf[..]).unwrap(), rows);
}

#[test]
fn field_files_have_one_row_per_site() {
    let d = DiscreteDomain::square(3, 0.25).unwrap();
    let mut buf = Vec::new();
    let spins: Vec<i64> = (0..d.face_count() as i64).collect();
    write_face_field(&mut buf, &d, &FieldValues::Integer(&spins)).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 1 + 9);
    assert!(text.lines().nth(1).unwrap().starts_with("0,0,0.125,0.125,"));
    let mut buf = Vec::new();
    let short = vec![0.0; 3];
    assert!(write_vertex_field(&mut buf, &d, &FieldValues::Real(&short)).is_err());
}
