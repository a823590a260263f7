mod common;

use common::fixture;
use common::survey::check_all_edges;
use lite::load_project;

#[test]
fn desk_scale_questionnaire() {
    let loaded = load_project(&fixture("malaria/lite.toml")).unwrap();
    let errors: Vec<_> = loaded.diagnostics.iter().filter(|d| d.is_error()).collect();
    assert!(errors.is_empty(), "{errors:?}");
    let def = loaded.questionnaire("malaria").unwrap();
    assert_eq!(def.fields.len(), 18);
    assert_eq!(def.total_keys(), 75);
    let edges: usize = def.fields.iter().map(|f| f.routing.len()).sum();
    assert_eq!(check_all_edges(def, loaded.ready().unwrap()), Ok(edges));
}

#[test]
fn fixture_matches_generator() {
    // generate.py is the source of truth for the checked-in files.
    let dir = fixture("malaria");
    let rules = std::fs::read_to_string(dir.join("malaria.lite")).unwrap();
    assert_eq!(rules.matches("TrPhrase $$top").count(), 75);
}
