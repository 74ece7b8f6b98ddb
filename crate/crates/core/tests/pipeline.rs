mod common;

use matner::trends::{
    condition_by_year, count_materials_by_year, tabulate_countries, write_conditions, write_countries,
    write_year_rankings, MaterialFilter,
};

#[test]
fn brat_text_matches_ingested_paragraphs() {
    for (doc, paragraphs) in common::fixture_documents() {
        let text: Vec<&str> = doc.paragraphs.iter().map(|p| p.text.as_str()).collect();
        let brat: Vec<&str> = paragraphs.iter().map(|p| p.paragraph.text.as_str()).collect();
        assert_eq!(text, brat, "{}", doc.doc_id);
    }
}

#[test]
fn trend_tables_match_golden_files() {
    let records = common::fixture_records();
    assert_eq!(records.len(), 14);
    let mut out = Vec::new();
    write_year_rankings(&mut out, &count_materials_by_year(&records, &["Abstract"], 2)).unwrap();
    assert_eq!(String::from_utf8(out).unwrap(), common::golden("year_ranking.csv"));
    let mut out = Vec::new();
    let countries = tabulate_countries(&records);
    assert_eq!(countries.skipped, 1);
    write_countries(&mut out, &countries).unwrap();
    assert_eq!(String::from_utf8(out).unwrap(), common::golden("countries.csv"));
    let mut out = Vec::new();
    write_conditions(&mut out, &condition_by_year(&records, &MaterialFilter::Any)).unwrap();
    assert_eq!(String::from_utf8(out).unwrap(), common::golden("conditions.csv"));
}
