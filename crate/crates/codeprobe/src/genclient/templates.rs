//! Stage prompt templates with named placeholders.
//!
//! Templates ship as editable text files under `templates/`; the compiled-in
//! defaults are those same files, so pointing the config at a template
//! directory is the only customization mechanism. Rendering is a pure text
//! substitution: the same inputs always produce a byte-identical prompt.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    ProblemGen,
    DifficultyRating,
    SkeletonGen,
    TestGen,
    SolutionSampling,
}

impl Stage {
    pub const ALL: [Stage; 5] = [
        Stage::ProblemGen,
        Stage::DifficultyRating,
        Stage::SkeletonGen,
        Stage::TestGen,
        Stage::SolutionSampling,
    ];

    /// File stem of the stage's template inside a template directory.
    pub fn file_stem(self) -> &'static str {
        match self {
            Stage::ProblemGen => "problem_gen",
            Stage::DifficultyRating => "difficulty_rating",
            Stage::SkeletonGen => "skeleton_gen",
            Stage::TestGen => "test_gen",
            Stage::SolutionSampling => "solution_sampling",
        }
    }

    /// Placeholders the stage's renderer substitutes; all must be present
    /// in the template text.
    fn required_placeholders(self) -> &'static [&'static str] {
        match self {
            Stage::ProblemGen => &[],
            Stage::DifficultyRating => &["{description}"],
            Stage::SkeletonGen => &["{description}", "{signature}"],
            Stage::TestGen => &["{description}", "{signature}", "{count}"],
            Stage::SolutionSampling => &["{description}", "{signature}"],
        }
    }
}

/// One stage's template text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageTemplate {
    pub stage: Stage,
    pub template_text: String,
}

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("template for stage {stage:?} is missing placeholder {placeholder}")]
    MissingPlaceholder {
        stage: Stage,
        placeholder: &'static str,
    },
    #[error("no template for stage {0:?}")]
    MissingStage(Stage),
    #[error("cannot read template {path}: {source}")]
    Unreadable {
        path: String,
        source: std::io::Error,
    },
}

/// Values substituted into a stage template.
#[derive(Debug, Clone, Copy, Default)]
pub struct RenderVars<'a> {
    pub description: &'a str,
    pub signature: &'a str,
    pub skeleton: &'a str,
    pub count: u32,
}

/// The full template set for the five generation stages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageTemplates {
    templates: BTreeMap<Stage, String>,
}

impl StageTemplates {
    /// The shipped defaults, compiled from the repository's `templates/`
    /// directory.
    pub fn builtin() -> Self {
        let mut templates = BTreeMap::new();
        templates.insert(
            Stage::ProblemGen,
            include_str!("../../templates/problem_gen.txt").to_string(),
        );
        templates.insert(
            Stage::DifficultyRating,
            include_str!("../../templates/difficulty_rating.txt").to_string(),
        );
        templates.insert(
            Stage::SkeletonGen,
            include_str!("../../templates/skeleton_gen.txt").to_string(),
        );
        templates.insert(
            Stage::TestGen,
            include_str!("../../templates/test_gen.txt").to_string(),
        );
        templates.insert(
            Stage::SolutionSampling,
            include_str!("../../templates/solution_sampling.txt").to_string(),
        );
        Self { templates }
    }

    /// Load `{stage}.txt` files from a directory.
    pub fn load_dir(dir: &Path) -> Result<Self, TemplateError> {
        let mut templates = BTreeMap::new();
        for stage in Stage::ALL {
            let path = dir.join(format!("{}.txt", stage.file_stem()));
            let text = std::fs::read_to_string(&path).map_err(|source| {
                TemplateError::Unreadable {
                    path: path.display().to_string(),
                    source,
                }
            })?;
            templates.insert(stage, text);
        }
        Ok(Self { templates })
    }

    pub fn validate(&self) -> Result<(), TemplateError> {
        for stage in Stage::ALL {
            let text = self
                .templates
                .get(&stage)
                .ok_or(TemplateError::MissingStage(stage))?;
            for placeholder in stage.required_placeholders() {
                if !text.contains(placeholder) {
                    return Err(TemplateError::MissingPlaceholder { stage, placeholder });
                }
            }
        }
        Ok(())
    }

    /// Substitute the named placeholders into the stage's template.
    pub fn render(&self, stage: Stage, vars: &RenderVars<'_>) -> Result<String, TemplateError> {
        let text = self
            .templates
            .get(&stage)
            .ok_or(TemplateError::MissingStage(stage))?;
        Ok(text
            .replace("{description}", vars.description)
            .replace("{signature}", vars.signature)
            .replace("{skeleton}", vars.skeleton)
            .replace("{count}", &vars.count.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_templates_are_complete() {
        let templates = StageTemplates::builtin();
        templates.validate().unwrap();
    }

    #[test]
    fn rendering_is_pure() {
        let templates = StageTemplates::builtin();
        let vars = RenderVars {
            description: "Sum two ints.",
            signature: "def add(a, b):",
            skeleton: "",
            count: 100,
        };
        let a = templates.render(Stage::TestGen, &vars).unwrap();
        let b = templates.render(Stage::TestGen, &vars).unwrap();
        assert_eq!(a, b);
        assert!(a.contains("Sum two ints."));
        assert!(a.contains("100"));
        assert!(!a.contains("{description}"));
    }

    #[test]
    fn missing_placeholder_fails_validation() {
        let mut templates = StageTemplates::builtin();
        templates
            .templates
            .insert(Stage::TestGen, "write some tests".into());
        assert!(matches!(
            templates.validate(),
            Err(TemplateError::MissingPlaceholder {
                stage: Stage::TestGen,
                ..
            })
        ));
    }

    #[test]
    fn load_dir_round_trips_the_shipped_files() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("templates");
        let loaded = StageTemplates::load_dir(&dir).unwrap();
        assert_eq!(loaded, StageTemplates::builtin());
    }
}
