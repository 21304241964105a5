//! The ten acceptance criteria, run in order with one report line each.

use std::io::Write;

use swamm::verify;

#[test]
fn acceptance_criteria() {
    let reports = verify::run(&[]);
    assert_eq!(reports.len(), 10);
    // written to the raw handle so the lines show without --nocapture
    let mut err = std::io::stderr().lock();
    writeln!(err).unwrap();
    for r in &reports {
        writeln!(err, "{r}").unwrap();
    }
    let failed: Vec<u8> = reports.iter().filter(|r| !r.passed).map(|r| r.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
