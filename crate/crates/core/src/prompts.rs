//! Versioned prompt templates. Each asset starts with a `# prompt-version: N`
//! line that is stripped before use; `{name}` placeholders are filled by
//! [`fill`].

pub const MANAGER: &str = include_str!("../prompts/manager.txt");
pub const PROGRESS: &str = include_str!("../prompts/progress.txt");
pub const DECISION: &str = include_str!("../prompts/decision.txt");
pub const REFLECTION: &str = include_str!("../prompts/reflection.txt");
pub const INTENTION: &str = include_str!("../prompts/intention.txt");

/// Version declared in the asset header, if any.
pub fn version(template: &str) -> Option<u32> {
    template
        .lines()
        .next()?
        .strip_prefix("# prompt-version:")?
        .trim()
        .parse()
        .ok()
}

fn body(template: &str) -> &str {
    match template.split_once('\n') {
        Some((first, rest)) if first.starts_with("# prompt-version:") => rest,
        _ => template,
    }
}

/// Substitutes every `{key}` with its value. Unknown placeholders are left in
/// place.
pub fn fill(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = body(template).to_string();
    for (key, value) in vars {
        out = out.replace(&format!("{{{key}}}"), value);
    }
    out.trim_end().to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_asset_is_versioned() {
        for t in [MANAGER, PROGRESS, DECISION, REFLECTION, INTENTION] {
            assert_eq!(version(t), Some(1));
        }
    }

    #[test]
    fn fill_strips_header() {
        let t = "# prompt-version: 1\nHello {who}\n";
        assert_eq!(fill(t, &[("who", "there")]), "Hello there");
    }
}
