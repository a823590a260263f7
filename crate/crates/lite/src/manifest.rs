//! The project manifest (`lite.toml`) and loading a project from disk.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use lite_core::diagnostic::has_errors;
use lite_core::questionnaire::{check_questionnaire, QuestionnaireDef};
use lite_core::sign::SignLexicon;
use lite_core::{assemble, parse_rule_file, AssembledProject, Diagnostic, FileRole, LanguageTag, ProjectManifest};
use serde::Deserialize;

use crate::lexicon::{load_lexicon, LexiconPaths};
use crate::questionnaire::load_questionnaire;
use crate::signcsv::parse_sign_csv;

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Syntax { path: PathBuf, message: String },
}

pub(crate) fn read(path: &Path) -> Result<String, LoadError> {
    fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// On-disk manifest. Paths are relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestFile {
    pub id: String,
    pub source_language: LanguageTag,
    /// BCP 47 locale written into SRGS grammars.
    #[serde(default)]
    pub source_locale: Option<String>,
    #[serde(default)]
    pub target_languages: Vec<LanguageTag>,
    #[serde(default)]
    pub sign_languages: Vec<LanguageTag>,
    #[serde(default)]
    pub files: FileLists,
    #[serde(default)]
    pub questionnaires: Vec<PathBuf>,
    /// Sign language → lexicon CSV paths.
    #[serde(default)]
    pub lexicon: BTreeMap<LanguageTag, LexiconPaths>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileLists {
    #[serde(default)]
    pub source: Vec<PathBuf>,
    #[serde(default)]
    pub monolithic: Vec<PathBuf>,
    /// Target language → files.
    #[serde(default)]
    pub target: BTreeMap<LanguageTag, Vec<PathBuf>>,
    /// Sign language → rule files (`.lite` text or `.csv`).
    #[serde(default)]
    pub sign: BTreeMap<LanguageTag, Vec<PathBuf>>,
}

impl ManifestFile {
    pub fn parse(text: &str, path: &Path) -> Result<ManifestFile, LoadError> {
        toml::from_str(text).map_err(|e| LoadError::Syntax {
            path: path.to_path_buf(),
            message: e.message().to_string(),
        })
    }

    pub fn project_manifest(&self) -> ProjectManifest {
        ProjectManifest {
            id: self.id.clone(),
            source_language: self.source_language.clone(),
            source_locale: self.source_locale.clone(),
            target_languages: self.target_languages.clone(),
            sign_languages: self.sign_languages.clone(),
        }
    }

    /// Rule files in assembly order with their roles: source files, then
    /// monolithic, then targets and sign files by language.
    pub fn rule_files(&self) -> Vec<(&Path, FileRole)> {
        let mut out: Vec<(&Path, FileRole)> = Vec::new();
        out.extend(self.files.source.iter().map(|p| (p.as_path(), FileRole::Source)));
        out.extend(self.files.monolithic.iter().map(|p| (p.as_path(), FileRole::Monolithic)));
        for (lang, paths) in &self.files.target {
            out.extend(paths.iter().map(|p| (p.as_path(), FileRole::Target(lang.clone()))));
        }
        for (lang, paths) in &self.files.sign {
            out.extend(paths.iter().map(|p| (p.as_path(), FileRole::Sign(lang.clone()))));
        }
        out
    }

    fn check(&self, path: &str) -> Vec<Diagnostic> {
        let mut diags = Vec::new();
        if self.target_languages.contains(&self.source_language) {
            diags.push(Diagnostic::error(
                "ManifestError",
                format!("{} is both source and target", self.source_language),
                path,
                None,
            ));
        }
        let mut seen = BTreeSet::new();
        let all = self.rule_files().into_iter().map(|(p, _)| p).chain(self.questionnaires.iter().map(PathBuf::as_path));
        for p in all {
            if !seen.insert(p) {
                diags.push(Diagnostic::error(
                    "ManifestError",
                    format!("{} is listed twice", p.display()),
                    path,
                    None,
                ));
            }
        }
        for lang in self.files.target.keys() {
            if !self.target_languages.contains(lang) {
                diags.push(Diagnostic::warning(
                    "UnknownTargetLanguage",
                    format!("files listed for {lang}, which is not a target language"),
                    path,
                    None,
                ));
            }
        }
        diags
    }
}

/// A project read from disk with everything derived from it.
#[derive(Debug)]
pub struct LoadedProject {
    pub manifest_path: PathBuf,
    pub manifest: ManifestFile,
    /// Present unless assembly failed outright.
    pub project: Option<AssembledProject>,
    pub diagnostics: Vec<Diagnostic>,
    pub questionnaires: Vec<QuestionnaireDef>,
    pub lexicons: BTreeMap<LanguageTag, SignLexicon>,
}

impl LoadedProject {
    pub fn root(&self) -> &Path {
        self.manifest_path.parent().unwrap_or(Path::new("."))
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        self.root().join(p)
    }

    pub fn has_errors(&self) -> bool {
        has_errors(&self.diagnostics)
    }

    /// The project, when it assembled without errors.
    pub fn ready(&self) -> Option<&AssembledProject> {
        self.project.as_ref().filter(|_| !self.has_errors())
    }

    pub fn questionnaire(&self, id: &str) -> Option<&QuestionnaireDef> {
        self.questionnaires.iter().find(|q| q.id == id)
    }
}

pub(crate) fn display(p: &Path) -> String {
    p.to_string_lossy().replace('\\', "/")
}

/// Read the manifest and every file it names, assemble and validate.
///
/// IO and manifest syntax failures are `Err`; problems inside rule files,
/// lexicons and questionnaires become diagnostics.
pub fn load_project(manifest_path: &Path) -> Result<LoadedProject, LoadError> {
    let manifest = ManifestFile::parse(&read(manifest_path)?, manifest_path)?;
    let root = manifest_path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let mut diagnostics = manifest.check(&display(manifest_path));
    let canonical = &manifest.source_language;
    let mut files = Vec::new();
    for (rel, role) in manifest.rule_files() {
        let text = read(&root.join(rel))?;
        let name = display(rel);
        let (file, diags) = match &role {
            FileRole::Sign(lang) if rel.extension().is_some_and(|e| e == "csv") => {
                parse_sign_csv(&text, &name, lang, canonical)
            }
            _ => parse_rule_file(&text, &name, role, canonical),
        };
        diagnostics.extend(diags);
        files.push(file);
    }
    let assembly = assemble(&manifest.project_manifest(), &files);
    diagnostics.extend(assembly.diagnostics);
    let project = assembly.project;

    let mut questionnaires = Vec::new();
    for rel in &manifest.questionnaires {
        let text = read(&root.join(rel))?;
        let name = display(rel);
        match load_questionnaire(&text, &name) {
            Ok(def) => {
                if let Some(p) = &project {
                    diagnostics.extend(check_questionnaire(&def, p, &name));
                }
                questionnaires.push(def);
            }
            Err(d) => diagnostics.push(d),
        }
    }

    let mut lexicons = BTreeMap::new();
    for (lang, paths) in &manifest.lexicon {
        let (lex, diags) = load_lexicon(&root, paths)?;
        diagnostics.extend(diags);
        lexicons.insert(lang.clone(), lex);
    }

    Ok(LoadedProject {
        manifest_path: manifest_path.to_path_buf(),
        manifest,
        project,
        diagnostics,
        questionnaires,
        lexicons,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_schema() {
        let text = r#"
id = "cafe"
source_language = "english"
target_languages = ["french"]

[files]
source = ["english.lite"]
monolithic = ["hello.lite"]
target.french = ["french.lite"]
"#;
        let m = ManifestFile::parse(text, Path::new("lite.toml")).unwrap();
        let files: Vec<_> = m.rule_files().into_iter().map(|(p, r)| (display(p), r)).collect();
        assert_eq!(files[0], ("english.lite".to_string(), FileRole::Source));
        assert_eq!(files[1].1, FileRole::Monolithic);
        assert_eq!(files[2].1, FileRole::Target(LanguageTag::new("french").unwrap()));
        assert!(m.check("lite.toml").is_empty());
    }

    #[test]
    fn manifest_invariants() {
        let text = r#"
id = "x"
source_language = "english"
target_languages = ["english"]
[files]
source = ["a.lite", "a.lite"]
"#;
        let m = ManifestFile::parse(text, Path::new("lite.toml")).unwrap();
        let codes: Vec<_> = m.check("lite.toml").iter().map(|d| d.code).collect();
        assert_eq!(codes, ["ManifestError", "ManifestError"]);
        assert!(ManifestFile::parse("id = 3", Path::new("m")).is_err());
    }
}
