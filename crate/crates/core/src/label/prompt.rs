use super::taxonomy::{Taxonomy, OTHER};

/// Renders the labeling prompt for one cluster. The output depends only on
/// the exemplar texts (in order) and the taxonomy.
pub fn render_prompt(exemplar_texts: &[&str], taxonomy: &Taxonomy) -> String {
    let mut s = String::from(
        "The prompts below were grouped together by a clustering of AI safety benchmark prompts.\n\
         Assign the group exactly one harm category from this list:\n",
    );
    for label in taxonomy.labels() {
        s.push_str("- ");
        s.push_str(label);
        s.push('\n');
    }
    s.push_str(&format!(
        "If the prompts fit none of the listed categories, answer {OTHER}.\n\
         Reply with the category name only, on a single line.\n\nPrompts:\n"
    ));
    for (i, text) in exemplar_texts.iter().enumerate() {
        let flat = text.split_whitespace().collect::<Vec<_>>().join(" ");
        s.push_str(&format!("{}. {}\n", i + 1, flat));
    }
    s
}
