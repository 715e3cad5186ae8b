mod common;

use common::enumerate::enumerate_pmf;
use decomp_gw::pgf::{extinction_time_pmf, SurvivalTable};
use decomp_gw::zoo;

#[test]
fn micro_pmf_matches_enumeration() {
    let spec = zoo::micro_table();
    let (pmf, bound) = enumerate_pmf(&spec, 8, 80);
    assert!(bound < 1e-12, "truncation bound {bound}");
    let table = SurvivalTable::build(&spec, 8);
    for (k, p) in pmf.iter().enumerate() {
        let n = k + 1;
        let e = extinction_time_pmf(&table, 0, n).unwrap();
        assert!((e - p).abs() <= 1e-9, "n={n}: engine {e} enumeration {p}");
    }
}

#[test]
fn enumeration_conserves_mass_on_a_large_box() {
    let spec = zoo::micro_table();
    let e = common::enumerate::enumerate(&spec, 0, 4, 40);
    // four generations never leave a box of side 40
    assert!(e.dropped.abs() < 1e-14, "{}", e.dropped);
    let table = SurvivalTable::build(&spec, 4);
    for n in 1..=4 {
        assert!((e.extinct[n] - table.extinction_cdf(0, n)).abs() < 1e-13);
    }
}

#[test]
fn geometric_closed_forms_to_ten_thousand() {
    let spec = zoo::geometric_single();
    let table = SurvivalTable::build(&spec, 10_000);
    for n in 1..=10_000usize {
        let nf = n as f64;
        let d = table.survival(0, n);
        assert!((d * (nf + 1.0) - 1.0).abs() < 1e-10, "survival at {n}");
        let p = extinction_time_pmf(&table, 0, n).unwrap();
        assert!((p * nf * (nf + 1.0) - 1.0).abs() < 1e-10, "pmf at {n}");
    }
}
