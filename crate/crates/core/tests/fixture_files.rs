use std::path::Path;

use egdn::fixtures::{bench_spec, monotone_deletion_spec, oscillating_spec, sync_bi_spec, synthetic_cd};
use egdn::io::{content_to_json, NetworkSpec};
use egdn::model::Content;

fn load(name: &str) -> NetworkSpec {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name);
    NetworkSpec::from_json(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn fixture_files_match_constructors() {
    let mut bench = bench_spec();
    let cd = bench.slots.iter_mut().find(|s| s.id == "cd").unwrap();
    cd.content = Some(content_to_json(&Content::Model(synthetic_cd(2, 3, 2))));
    assert_eq!(load("bench.json"), bench);
    assert_eq!(load("oscillating.json"), oscillating_spec());
    assert_eq!(load("monotone.json"), monotone_deletion_spec());
    assert_eq!(load("sync-bi.json"), sync_bi_spec());
}
