use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::io::{self, BufRead, Write};
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use lite::lexicon::refresh_lexicon_files;
use lite::service::{serve, ServiceConfig};
use lite::{load_project, LoadedProject};
use lite_core::blank::{generate_blank_targets, refresh_blank_targets};
use lite_core::engine::translate_text;
use lite_core::grammar::{compile_grammar, count_language, emit_grammar, enumerate_language, GrammarFormat};
use lite_core::sign::{render_sigml, sign_translate};
use lite_core::{parse_rule_file, tokenize, AssembledProject, CanonicalKey, FileRole, LanguageTag};

#[derive(Parser)]
#[command(name = "lite", version, about = "Compile and run phrasal translation grammars")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Assemble and validate a project; print every diagnostic.
    Check { manifest: PathBuf },
    /// Print a blank target file for a language.
    Blank {
        manifest: PathBuf,
        #[arg(long)]
        lang: String,
    },
    /// Bring a language's target file up to date with the source side.
    Refresh {
        manifest: PathBuf,
        #[arg(long)]
        lang: String,
        /// Print the refreshed file instead of rewriting it.
        #[arg(long)]
        stdout: bool,
    },
    /// Translate one utterance per line of standard input.
    Translate {
        manifest: PathBuf,
        #[arg(long = "lang", required = true)]
        langs: Vec<String>,
        /// Add the matched canonical key as a last column.
        #[arg(long)]
        show_canonical: bool,
    },
    /// Write the recognition grammar.
    Compile {
        manifest: PathBuf,
        #[arg(long, value_enum, default_value = "lite-bnf")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        scope: Vec<String>,
    },
    /// Count the sentences the grammar derives, without enumerating.
    Count {
        manifest: PathBuf,
        #[arg(long, value_delimiter = ',')]
        scope: Vec<String>,
        /// Also enumerate to count distinct strings, up to this many derivations.
        #[arg(long)]
        distinct: Option<usize>,
    },
    /// Print sentences of the grammar in derivation order.
    Enumerate {
        manifest: PathBuf,
        #[arg(long, default_value_t = 100)]
        limit: usize,
        #[arg(long, value_delimiter = ',')]
        scope: Vec<String>,
    },
    /// Translate utterances on standard input into SiGML.
    Sign {
        manifest: PathBuf,
        #[arg(long)]
        lang: String,
        /// Print the sign table instead of SiGML.
        #[arg(long)]
        table: bool,
    },
    /// Add blank rows for missing symbols to a sign language's lexicon CSVs.
    SignRefresh {
        manifest: PathBuf,
        #[arg(long)]
        lang: String,
    },
    /// Run the HTTP service.
    Serve {
        manifest: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        #[arg(long = "questionnaire")]
        questionnaires: Vec<PathBuf>,
        #[arg(long)]
        journal: Option<PathBuf>,
        #[arg(long, default_value_t = 10_000)]
        max_sessions: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    LiteBnf,
    SrgsXml,
}

/// Failure already reported on standard error.
struct Reported;

type CmdResult = Result<(), Reported>;

fn fail(msg: impl std::fmt::Display) -> Reported {
    eprintln!("lite: {msg}");
    Reported
}

fn load(manifest: &Path, all_diagnostics: bool) -> Result<LoadedProject, Reported> {
    let loaded = load_project(manifest).map_err(fail)?;
    for d in &loaded.diagnostics {
        if all_diagnostics || d.is_error() {
            eprintln!("{d}");
        }
    }
    Ok(loaded)
}

fn ready(loaded: &LoadedProject) -> Result<&AssembledProject, Reported> {
    loaded.ready().ok_or(Reported)
}

fn tag(s: &str) -> Result<LanguageTag, Reported> {
    LanguageTag::new(s).map_err(|e| fail(format!("{s:?}: {e}")))
}

fn scope_set(keys: &[String]) -> Option<BTreeSet<CanonicalKey>> {
    (!keys.is_empty()).then(|| keys.iter().map(|k| CanonicalKey::normalize(k)).collect())
}

fn write_out(out: Option<&Path>, text: &str) -> CmdResult {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| fail(format!("{}: {e}", p.display()))),
        None => io::stdout().write_all(text.as_bytes()).map_err(fail),
    }
}

fn stdin_lines() -> impl Iterator<Item = String> {
    io::stdin().lock().lines().map_while(Result::ok).filter(|l| !l.trim().is_empty())
}

fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Check { manifest } => {
            let loaded = load(&manifest, true)?;
            let p = ready(&loaded)?;
            let units = p.all_units().len();
            let lexemes = p.all_lexemes().len();
            eprintln!("{}: {units} units, {lexemes} lexemes, {} questionnaires", loaded.manifest.id, loaded.questionnaires.len());
            Ok(())
        }
        Command::Blank { manifest, lang } => {
            let loaded = load(&manifest, false)?;
            let text = generate_blank_targets(ready(&loaded)?, &tag(&lang)?);
            write_out(None, &text)
        }
        Command::Refresh { manifest, lang, stdout } => {
            let loaded = load(&manifest, false)?;
            let p = ready(&loaded)?;
            let lang = tag(&lang)?;
            let files = loaded.manifest.files.target.get(&lang).map(Vec::as_slice).unwrap_or(&[]);
            let [rel] = files else {
                return Err(fail(format!("refresh needs exactly one target file for {lang}; the manifest lists {}", files.len())));
            };
            let path = loaded.resolve(rel);
            let text = fs::read_to_string(&path).map_err(|e| fail(format!("{}: {e}", path.display())))?;
            let (existing, _) = parse_rule_file(&text, &rel.to_string_lossy(), FileRole::Target(lang.clone()), p.source_language());
            let refreshed = refresh_blank_targets(&existing, p, &lang);
            write_out((!stdout).then_some(path.as_path()), &refreshed)
        }
        Command::Translate { manifest, langs, show_canonical } => {
            let loaded = load(&manifest, false)?;
            let p = ready(&loaded)?;
            let langs = langs.iter().map(|l| tag(l)).collect::<Result<Vec<_>, _>>()?;
            let mut out = io::stdout().lock();
            for line in stdin_lines() {
                let row = match translate_text(p, &line, &langs) {
                    Ok(r) => {
                        let mut cols = vec![r.paraphrase];
                        for (lang, o) in r.outputs {
                            cols.push(match o {
                                Ok(t) => format!("{lang}={t}"),
                                Err(e) => format!("{lang}=!{}", e.code()),
                            });
                        }
                        if show_canonical {
                            cols.push(format!("canonical={}", r.matched_key));
                        }
                        cols.join("\t")
                    }
                    Err(e) => format!("!{}", e.code()),
                };
                writeln!(out, "{row}").map_err(fail)?;
            }
            Ok(())
        }
        Command::Compile { manifest, format, out, scope } => {
            let loaded = load(&manifest, false)?;
            let g = compile_grammar(ready(&loaded)?, scope_set(&scope).as_ref()).map_err(fail)?;
            let format = match format {
                Format::LiteBnf => GrammarFormat::LiteBnf,
                Format::SrgsXml => GrammarFormat::SrgsXml,
            };
            write_out(out.as_deref(), &emit_grammar(&g, format))
        }
        Command::Count { manifest, scope, distinct } => {
            let loaded = load(&manifest, false)?;
            let g = compile_grammar(ready(&loaded)?, scope_set(&scope).as_ref()).map_err(fail)?;
            let size = count_language(&g);
            println!("derivations\t{}", size.count);
            println!("vocabulary\t{}", size.vocabulary);
            if let Some(max) = distinct {
                if size.count > max.into() {
                    return Err(fail(format!("{} derivations exceed --distinct {max}", size.count)));
                }
                let unique: HashSet<Vec<String>> = enumerate_language(&g, max).collect();
                println!("distinct\t{}", unique.len());
            }
            Ok(())
        }
        Command::Enumerate { manifest, limit, scope } => {
            let loaded = load(&manifest, false)?;
            let g = compile_grammar(ready(&loaded)?, scope_set(&scope).as_ref()).map_err(fail)?;
            let mut out = io::stdout().lock();
            for s in enumerate_language(&g, limit) {
                writeln!(out, "{}", s.join(" ")).map_err(fail)?;
            }
            Ok(())
        }
        Command::Sign { manifest, lang, table } => {
            let loaded = load(&manifest, false)?;
            let p = ready(&loaded)?;
            let lang = tag(&lang)?;
            let empty = Default::default();
            let lex = loaded.lexicons.get(&lang).unwrap_or(&empty);
            let mut out = io::stdout().lock();
            let mut failed = false;
            for line in stdin_lines() {
                let result = tokenize(&line)
                    .map_err(|_| lite_core::sign::SignError::Engine(lite_core::EngineError::EmptyUtterance))
                    .and_then(|u| sign_translate(p, &lang, &u))
                    .and_then(|t| if table { Ok(t.to_string()) } else { render_sigml(&t, lex) });
                match result {
                    Ok(text) => write!(out, "{text}").map_err(fail)?,
                    Err(e) => {
                        failed = true;
                        eprintln!("{line:?}: {} {e}", e.code());
                    }
                }
            }
            if failed {
                Err(Reported)
            } else {
                Ok(())
            }
        }
        Command::SignRefresh { manifest, lang } => {
            let loaded = load(&manifest, false)?;
            let p = ready(&loaded)?;
            let lang = tag(&lang)?;
            let paths = loaded
                .manifest
                .lexicon
                .get(&lang)
                .ok_or_else(|| fail(format!("the manifest names no lexicon for {lang}")))?;
            let inv = p.sign_rules(&lang).map(|s| s.inventory()).unwrap_or_default();
            for path in refresh_lexicon_files(loaded.root(), paths, &inv).map_err(fail)? {
                eprintln!("updated {}", path.display());
            }
            Ok(())
        }
        Command::Serve { manifest, port, host, questionnaires, journal, max_sessions } => {
            let config = ServiceConfig {
                addr: SocketAddr::new(host, port),
                manifest,
                questionnaires,
                journal,
                max_sessions,
            };
            let rt = tokio::runtime::Runtime::new().map_err(fail)?;
            rt.block_on(serve(config)).map_err(fail)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Reported) => ExitCode::FAILURE,
    }
}
