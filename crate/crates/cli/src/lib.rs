//! The `cireg` command-line tool.
//!
//! Every command runs either against a local data directory or, when an
//! endpoint is configured, against a running service. Both modes print the
//! same bytes for the same registry state. Data goes to stdout, diagnostics
//! to stderr. Exit codes: 0 success, 1 registry or validation error, 2 usage
//! or I/O error.

mod args;
mod backend;
mod output;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use cireg_core::canonical;
use cireg_core::schema::{validate, SpecError};
use cireg_core::store::{Clause, StoreError};
use cireg_service::ops::AppSource;
use cireg_service::{load_specs, ApiError, Config, ServeError, Server};
use clap::Parser;
use serde::Deserialize;
use serde_json::Value;

pub use args::{Cli, Command, Output};
use backend::Backend;

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug)]
pub(crate) enum Failure {
    Domain {
        code: String,
        message: String,
        details: Option<Value>,
    },
    Usage(String),
}

impl Failure {
    fn report(&self, err: &mut dyn Write) -> i32 {
        match self {
            Failure::Domain { code, message, details } => {
                let _ = writeln!(err, "{code}: {message}");
                let issues = details.as_ref().and_then(|d| d["errors"].as_array());
                for issue in issues.into_iter().flatten() {
                    let _ = writeln!(
                        err,
                        "  {}: {}: {}",
                        issue["path"].as_str().unwrap_or("?"),
                        issue["code"].as_str().unwrap_or("?"),
                        issue["message"].as_str().unwrap_or("")
                    );
                }
                EXIT_DOMAIN
            }
            Failure::Usage(message) => {
                let _ = writeln!(err, "cireg: {message}");
                EXIT_USAGE
            }
        }
    }
}

/// The `[client]` table of the shared config file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClientSection {
    endpoint: Option<String>,
    token: Option<String>,
    output: Option<Output>,
}

struct Settings {
    service: Config,
    endpoint: Option<String>,
    token: Option<String>,
    output: Output,
}

fn settings(cli: &Cli) -> Result<Settings, Failure> {
    let mut service = Config::load(cli.config.as_deref()).map_err(|e| Failure::Usage(e.to_string()))?;
    let client: ClientSection = match service.client.take() {
        Some(table) => table
            .try_into()
            .map_err(|e| Failure::Usage(format!("[client]: {e}")))?,
        None => ClientSection::default(),
    };
    let endpoint = cli.endpoint.clone().or(client.endpoint).filter(|e| !e.is_empty());
    if endpoint.is_some() && cli.data_dir.is_some() {
        return Err(Failure::Usage("--data-dir and an endpoint are mutually exclusive".into()));
    }
    if let Some(dir) = &cli.data_dir {
        service.data_dir = dir.clone();
    }
    Ok(Settings {
        service,
        endpoint,
        token: cli.token.clone().or(client.token),
        output: cli.output.or(client.output).unwrap_or(Output::Json),
    })
}

fn read(path: &PathBuf) -> Result<Vec<u8>, Failure> {
    std::fs::read(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn syntax_failure(e: serde_json::Error) -> Failure {
    ApiError::from(StoreError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
    .into()
}

/// Runs one invocation and returns its exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    let settings = match settings(&cli) {
        Ok(s) => s,
        Err(f) => return f.report(err),
    };
    if let Command::Serve = cli.command {
        return serve(settings.service, err);
    }
    match execute(cli.command, &settings) {
        Ok((value, render, code)) => {
            let text = match settings.output {
                Output::Json => {
                    let mut t = canonical::to_string(&value);
                    t.push('\n');
                    t
                }
                Output::Table => render(&value),
            };
            if out.write_all(text.as_bytes()).and_then(|_| out.flush()).is_err() {
                return EXIT_USAGE;
            }
            code
        }
        Err(f) => f.report(err),
    }
}

type Rendered = (Value, fn(&Value) -> String, i32);

fn execute(command: Command, settings: &Settings) -> Result<Rendered, Failure> {
    let writes = matches!(command, Command::Publish { .. } | Command::Archive { .. });
    let backend = match &settings.endpoint {
        Some(endpoint) => Backend::remote(endpoint, settings.token.clone()),
        None => {
            let specs = load_specs(&settings.service).map_err(|e| Failure::Usage(format!("spec directory: {e}")))?;
            Backend::local(&settings.service.data_dir, specs, writes)?
        }
    };
    let done: Rendered = match command {
        Command::Validate { file, kind, spec } => {
            let document = read(&file)?;
            let version = spec
                .map(|v| v.parse())
                .transpose()
                .map_err(|e| Failure::Usage(format!("--spec: {e}")))?;
            let spec = backend.spec(kind, version)?;
            let report = validate(&document, &spec).map_err(|e| match e {
                SpecError::Syntax { line, column, message } => {
                    Failure::from(ApiError::from(StoreError::Syntax { line, column, message }))
                }
                other => Failure::Usage(other.to_string()),
            })?;
            let code = if report.valid { EXIT_OK } else { EXIT_DOMAIN };
            (serde_json::to_value(&report).expect("reports serialize"), output::report, code)
        }
        Command::Publish { file, kind, id, expect_version } => {
            let document = read(&file)?;
            let id = match id {
                Some(id) => id,
                None => {
                    let doc: Value = serde_json::from_slice(&document).map_err(syntax_failure)?;
                    doc.get("id")
                        .and_then(Value::as_str)
                        .map(String::from)
                        .ok_or_else(|| Failure::Usage("document has no string id; pass --id".into()))?
                }
            };
            (backend.publish(kind, &id, &document, expect_version)?, output::published, EXIT_OK)
        }
        Command::Get { kind, id, version } => (backend.get(kind, &id, version)?, output::entry, EXIT_OK),
        Command::Archive { kind, id } => (backend.archive(kind, &id)?, output::meta, EXIT_OK),
        Command::History { kind, id } => (backend.history(kind, &id)?, output::history, EXIT_OK),
        Command::Search { kind, clauses, include_archived } => {
            let clauses = clauses
                .iter()
                .map(|c| Clause::parse(c).map_err(|e| Failure::Usage(format!("--where {c:?}: {}", e.message))))
                .collect::<Result<Vec<_>, _>>()?;
            (backend.search(kind, clauses, include_archived)?, output::hits, EXIT_OK)
        }
        Command::Match { app_file, app_id, app_version, compatible_only } => {
            let source = match (app_file, app_id) {
                (Some(file), _) => AppSource::Inline(read(&file)?),
                (None, Some(id)) => AppSource::Registered {
                    id,
                    selector: app_version.unwrap_or(cireg_core::store::Selector::Latest),
                },
                (None, None) => return Err(Failure::Usage("give an application file or --app-id".into())),
            };
            (backend.match_app(source, compatible_only)?, output::matches, EXIT_OK)
        }
        Command::Serve => unreachable!("handled before a backend is opened"),
    };
    backend.close()?;
    Ok(done)
}

fn serve(config: Config, err: &mut dyn Write) -> i32 {
    let _ = tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_max_level(tracing_subscriber::filter::LevelFilter::INFO)
        .try_init();
    let runtime = match tokio::runtime::Builder::new_multi_thread().enable_all().build() {
        Ok(rt) => rt,
        Err(e) => return Failure::Usage(format!("runtime: {e}")).report(err),
    };
    runtime.block_on(async {
        let server = match Server::bind(&config).await {
            Ok(s) => s,
            Err(e @ ServeError::Specs(_)) => return Failure::Usage(e.to_string()).report(err),
            Err(e) => {
                let _ = writeln!(err, "cireg: {e}");
                return EXIT_DOMAIN;
            }
        };
        match server.local_addr() {
            Ok(addr) => {
                let _ = writeln!(err, "cireg: listening on http://{addr}");
                let _ = err.flush();
            }
            Err(e) => {
                let _ = writeln!(err, "cireg: {e}");
                return EXIT_DOMAIN;
            }
        }
        match server.run(cireg_service::termination()).await {
            Ok(()) => EXIT_OK,
            Err(e) => {
                let _ = writeln!(err, "cireg: {e}");
                EXIT_DOMAIN
            }
        }
    })
}
