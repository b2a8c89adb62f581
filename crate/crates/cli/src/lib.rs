//! Command-line and REPL front end.
//!
//! The REPL accepts the same commands as the command line (without the
//! leading `isoas`), plus `use <store>` and bare natural-language requests.

use std::io::{self, BufRead, Write};
use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use isoas_core::engine::DEFAULT_SESSION;
use isoas_core::{
    Engine, EngineConfig, Literal, PipelineResponse, SavedBody, SavedQuery,
};
use isoas_server::{serve_blocking, ServerConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Directory used when neither `--home` nor `ISOAS_HOME` is given.
pub const DEFAULT_HOME: &str = ".isoas";

#[derive(Debug, Parser)]
#[command(name = "isoas", version, about = "Natural-language search over record stores")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Global {
    /// Engine home directory.
    #[arg(long, global = true, env = "ISOAS_HOME")]
    pub home: Option<PathBuf>,
    /// Lexicon file replacing the bundled one.
    #[arg(long, global = true)]
    pub lexicon: Option<PathBuf>,
    /// Ontology file replacing the bundled one.
    #[arg(long, global = true)]
    pub ontology: Option<PathBuf>,
    #[arg(long, global = true, default_value = DEFAULT_SESSION)]
    pub session: String,
}

impl Global {
    pub fn engine_config(&self) -> EngineConfig {
        EngineConfig {
            home: Some(self.home.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_HOME))),
            lexicon: self.lexicon.clone(),
            ontology: self.ontology.clone(),
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Interactive session.
    Repl,
    /// Run a natural-language request.
    Query {
        text: String,
        #[arg(long)]
        store: Option<String>,
        /// Print the full response as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Run a restricted SQL statement.
    Sql {
        stmt: String,
        #[arg(long)]
        store: Option<String>,
        #[arg(long)]
        json: bool,
    },
    /// Manage stores.
    #[command(subcommand)]
    Store(StoreCommand),
    /// Load records from a CSV file.
    Ingest {
        file: PathBuf,
        #[arg(long)]
        store: String,
    },
    /// Manage saved queries.
    #[command(subcommand)]
    Saved(SavedCommand),
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        bind: String,
        /// Directory with the web console's static files.
        #[arg(long)]
        console: Option<PathBuf>,
    },
    /// Show the ledger for the session.
    History {
        #[arg(long)]
        json: bool,
    },
}

#[derive(Debug, Subcommand)]
pub enum StoreCommand {
    Create { name: String },
    Attach { name: String },
    Detach { name: String },
    List,
}

#[derive(Debug, Clone, Args)]
#[group(required = true, multiple = false)]
pub struct QuerySource {
    /// Natural-language request compiled into a structured query.
    #[arg(long)]
    pub text: Option<String>,
    /// Restricted SQL stored verbatim.
    #[arg(long)]
    pub sql: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum SavedCommand {
    /// Save a request or SQL statement under a name.
    Save {
        name: String,
        #[command(flatten)]
        source: QuerySource,
        /// Store the request is compiled against.
        #[arg(long)]
        store: Option<String>,
        /// Replace a query with the same name.
        #[arg(long)]
        overwrite: bool,
    },
    /// Run a saved query.
    Run {
        name: String,
        /// Value for an open comparison; repeat for several.
        #[arg(long = "bind")]
        bindings: Vec<String>,
        /// Store to run against instead of the session's.
        #[arg(long)]
        store: Option<String>,
        #[arg(long)]
        json: bool,
    },
    /// Replace the body of an existing saved query.
    Edit {
        name: String,
        #[command(flatten)]
        source: QuerySource,
        #[arg(long)]
        store: Option<String>,
    },
    /// Print a saved query.
    Show { name: String },
    List,
    Delete { name: String },
}

/// Writes a response in human-readable form.
pub fn render(resp: &PipelineResponse, out: &mut dyn Write) -> io::Result<()> {
    if let Some(rule) = resp.rule {
        writeln!(out, "rule: {rule}")?;
    }
    if let Some(sql) = &resp.sql {
        writeln!(out, "sql: {sql}")?;
    }
    for d in &resp.diagnostics {
        writeln!(out, "note: {}", d.message)?;
    }
    if let Some(results) = &resp.results {
        let header = ["id", "name", "kind", "value"];
        let rows: Vec<[String; 4]> = results
            .rows
            .iter()
            .map(|r| [r.id.to_string(), r.name.clone(), r.kind.clone(), r.value.to_string()])
            .collect();
        let mut widths = header.map(str::len);
        for row in &rows {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let line = |cells: [&str; 4]| {
            cells
                .iter()
                .zip(widths)
                .map(|(c, w)| format!("{c:<w$}"))
                .collect::<Vec<_>>()
                .join("  ")
                .trim_end()
                .to_string()
        };
        writeln!(out, "{}", line(header))?;
        for row in &rows {
            writeln!(out, "{}", line([&row[0], &row[1], &row[2], &row[3]].map(String::as_str)))?;
        }
        writeln!(out, "({} row{})", rows.len(), if rows.len() == 1 { "" } else { "s" })?;
    }
    if let Some(e) = &resp.error {
        writeln!(out, "error ({}): {}", serde_json::to_value(e.stage).unwrap_or_default().as_str().unwrap_or(""), e.message)?;
    }
    Ok(())
}

/// Runs one command against an open engine.
pub struct Shell<'a> {
    pub engine: &'a Engine,
    pub session: String,
    /// Store chosen with `use` in the REPL.
    pub store: Option<String>,
}

impl<'a> Shell<'a> {
    pub fn new(engine: &'a Engine, session: impl Into<String>) -> Self {
        Shell {
            engine,
            session: session.into(),
            store: None,
        }
    }

    fn store<'s>(&'s self, given: &'s Option<String>) -> Option<&'s str> {
        given.as_deref().or(self.store.as_deref())
    }

    fn respond(&self, resp: &PipelineResponse, json: bool, out: &mut dyn Write) -> io::Result<i32> {
        if json {
            writeln!(out, "{}", serde_json::to_string_pretty(resp).expect("responses serialize"))?;
        } else {
            render(resp, out)?;
        }
        Ok(if resp.is_ok() { EXIT_OK } else { EXIT_DOMAIN })
    }

    fn source_body(&self, source: &QuerySource, store: &Option<String>) -> Result<SavedBody, String> {
        match (&source.text, &source.sql) {
            (Some(text), _) => {
                let store = match self.store(store) {
                    Some(s) => s.to_string(),
                    None => self.engine.default_store().map_err(|e| e.to_string())?,
                };
                self.engine
                    .compile(text, &store)
                    .map(SavedBody::Ir)
                    .map_err(|e| e.message)
            }
            (None, Some(sql)) => Ok(SavedBody::Sql(sql.clone())),
            (None, None) => Err("give --text or --sql".into()),
        }
    }

    /// Executes a command, writing its output. Returns the exit code.
    pub fn run(&mut self, command: Command, out: &mut dyn Write) -> io::Result<i32> {
        let engine = self.engine;
        let repo = engine.repository();
        let fail = |out: &mut dyn Write, message: String| -> io::Result<i32> {
            writeln!(out, "error: {message}")?;
            Ok(EXIT_DOMAIN)
        };
        match command {
            Command::Repl => {
                writeln!(out, "already in a session")?;
                Ok(EXIT_USAGE)
            }
            Command::Query { text, store, json } => {
                let resp = engine.query(&text, &self.session, self.store(&store));
                self.respond(&resp, json, out)
            }
            Command::Sql { stmt, store, json } => {
                let resp = engine.sql(&stmt, &self.session, self.store(&store));
                self.respond(&resp, json, out)
            }
            Command::Store(cmd) => {
                let result = match cmd {
                    StoreCommand::Create { name } => repo.create_store(&name).map(|i| vec![i]),
                    StoreCommand::Attach { name } => repo.attach_store(&name).map(|i| vec![i]),
                    StoreCommand::Detach { name } => repo.detach_store(&name).map(|i| vec![i]),
                    StoreCommand::List => Ok(repo.list_stores()),
                };
                match result {
                    Ok(infos) => {
                        for info in infos {
                            let records = info.records.map_or("-".to_string(), |n| n.to_string());
                            let state = if info.state == isoas_core::StoreState::Attached {
                                "attached"
                            } else {
                                "detached"
                            };
                            writeln!(out, "{}  {}  {} records", info.name, state, records)?;
                        }
                        Ok(EXIT_OK)
                    }
                    Err(e) => fail(out, e.to_string()),
                }
            }
            Command::Ingest { file, store } => {
                let csv = match std::fs::read_to_string(&file) {
                    Ok(c) => c,
                    Err(e) => return fail(out, format!("cannot read {}: {e}", file.display())),
                };
                match repo.ingest(&store, &csv) {
                    Ok(n) => {
                        writeln!(out, "ingested {n} records into {store}")?;
                        Ok(EXIT_OK)
                    }
                    Err(e) => fail(out, e.to_string()),
                }
            }
            Command::Saved(cmd) => self.saved(cmd, out),
            Command::Serve { .. } => {
                writeln!(out, "error: `serve` is only available from the command line")?;
                Ok(EXIT_USAGE)
            }
            Command::History { json } => {
                let entries = repo.history(&self.session);
                if json {
                    writeln!(out, "{}", serde_json::to_string_pretty(&entries).expect("entries serialize"))?;
                } else {
                    for e in entries {
                        let stage = serde_json::to_value(e.stage).expect("stage serializes");
                        let summary = match e.payload.get("text") {
                            Some(t) => t.to_string(),
                            None => String::new(),
                        };
                        writeln!(out, "{:>4}  {:<9} {}", e.input_id, stage.as_str().unwrap_or(""), summary)?;
                    }
                }
                Ok(EXIT_OK)
            }
        }
    }

    fn saved(&mut self, cmd: SavedCommand, out: &mut dyn Write) -> io::Result<i32> {
        let repo = self.engine.repository();
        let result: Result<Option<SavedQuery>, String> = match cmd {
            SavedCommand::Save {
                name,
                source,
                store,
                overwrite,
            } => self.source_body(&source, &store).and_then(|body| {
                repo.save_query(SavedQuery::new(name, body), overwrite)
                    .map(Some)
                    .map_err(|e| e.to_string())
            }),
            SavedCommand::Edit { name, source, store } => repo
                .load_query(&name)
                .map_err(|e| e.to_string())
                .and_then(|_| self.source_body(&source, &store))
                .and_then(|body| {
                    repo.save_query(SavedQuery::new(name, body), true)
                        .map(Some)
                        .map_err(|e| e.to_string())
                }),
            SavedCommand::Show { name } => repo.load_query(&name).map(Some).map_err(|e| e.to_string()),
            SavedCommand::Run {
                name,
                bindings,
                store,
                json,
            } => {
                let literals: Vec<Literal> = bindings.iter().map(|b| Literal::infer(b)).collect();
                let resp = self
                    .engine
                    .saved(&name, &literals, &self.session, self.store(&store));
                return self.respond(&resp, json, out);
            }
            SavedCommand::List => {
                for q in repo.list_queries() {
                    writeln!(out, "{}  {}", q.name, describe(&q.body))?;
                }
                return Ok(EXIT_OK);
            }
            SavedCommand::Delete { name } => repo
                .delete_query(&name)
                .map(|_| None)
                .map_err(|e| e.to_string()),
        };
        match result {
            Ok(Some(q)) => {
                writeln!(out, "{}  {}", q.name, describe(&q.body))?;
                Ok(EXIT_OK)
            }
            Ok(None) => Ok(EXIT_OK),
            Err(message) => {
                writeln!(out, "error: {message}")?;
                Ok(EXIT_DOMAIN)
            }
        }
    }

    /// Interprets one REPL line. Returns `None` when the session should end.
    pub fn line(&mut self, line: &str, out: &mut dyn Write) -> io::Result<Option<i32>> {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            return Ok(Some(EXIT_OK));
        }
        let Some(words) = shlex::split(trimmed) else {
            writeln!(out, "error: unbalanced quotes")?;
            return Ok(Some(EXIT_USAGE));
        };
        match words[0].as_str() {
            "quit" | "exit" => return Ok(None),
            "help" => {
                writeln!(out, "{REPL_HELP}")?;
                return Ok(Some(EXIT_OK));
            }
            "use" => {
                let code = match words.get(1) {
                    Some(store) => match self.engine.repository().store_info(store) {
                        Ok(_) => {
                            self.store = Some(store.clone());
                            writeln!(out, "using {store}")?;
                            EXIT_OK
                        }
                        Err(e) => {
                            writeln!(out, "error: {e}")?;
                            EXIT_DOMAIN
                        }
                    },
                    None => {
                        writeln!(out, "usage: use <store>")?;
                        EXIT_USAGE
                    }
                };
                return Ok(Some(code));
            }
            first if REPL_COMMANDS.contains(&first) => {}
            _ => {
                let resp = self.engine.query(trimmed, &self.session, self.store.as_deref());
                return self.respond(&resp, false, out).map(Some);
            }
        }
        let args = std::iter::once("isoas".to_string()).chain(words);
        match Cli::try_parse_from(args) {
            Ok(cli) => self.run(cli.command, out).map(Some),
            Err(e) => {
                write!(out, "{}", e.render())?;
                Ok(Some(EXIT_USAGE))
            }
        }
    }

    /// Reads commands until end of input or `quit`.
    pub fn repl(&mut self, input: &mut dyn BufRead, out: &mut dyn Write, prompt: bool) -> io::Result<i32> {
        let mut last = EXIT_OK;
        let mut buf = String::new();
        loop {
            if prompt {
                write!(out, "isoas> ")?;
                out.flush()?;
            }
            buf.clear();
            if input.read_line(&mut buf)? == 0 {
                return Ok(last);
            }
            match self.line(&buf, out)? {
                Some(code) => last = code,
                None => return Ok(last),
            }
        }
    }
}

const REPL_COMMANDS: [&str; 7] = ["query", "sql", "store", "ingest", "saved", "history", "serve"];

const REPL_HELP: &str = "\
Type a request such as `I need document`, or a command:
  query \"<text>\" [--store S] [--json]
  sql \"<stmt>\" [--store S] [--json]
  store create|attach|detach <name> | store list
  ingest <file.csv> --store S
  saved save|edit <name> --text \"<text>\" | --sql \"<stmt>\"
  saved run <name> [--bind V]... | saved list | saved show|delete <name>
  history [--json]
  use <store>
  quit";

fn describe(body: &SavedBody) -> String {
    match body {
        SavedBody::Sql(sql) => format!("sql  {sql}"),
        SavedBody::Ir(q) => match isoas_core::render_sql(q) {
            Ok(sql) => format!("ir   {sql}"),
            Err(_) => format!(
                "ir   {} (open: {})",
                q.concepts.iter().cloned().collect::<Vec<_>>().join(", "),
                q.params.iter().map(|p| format!("{} {}", p.name, p.op)).collect::<Vec<_>>().join(", ")
            ),
        },
    }
}

/// Entry point shared by the binary; returns the process exit code.
pub fn main_with(cli: Cli) -> i32 {
    let config = cli.global.engine_config();
    if let Command::Serve { port, bind, console } = &cli.command {
        let addr: SocketAddr = match format!("{bind}:{port}").parse() {
            Ok(a) => a,
            Err(e) => {
                eprintln!("error: invalid address {bind}:{port}: {e}");
                return EXIT_USAGE;
            }
        };
        let server = ServerConfig {
            addr,
            engine: config,
            console_dir: console.clone(),
        };
        return match serve_blocking(server, |a| println!("listening on http://{a}")) {
            Ok(()) => EXIT_OK,
            Err(e) => {
                eprintln!("error: {e}");
                EXIT_DOMAIN
            }
        };
    }
    let engine = match Engine::open(&config) {
        Ok(e) => e,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_DOMAIN;
        }
    };
    let mut shell = Shell::new(&engine, cli.global.session.clone());
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let result = match cli.command {
        Command::Repl => {
            let stdin = io::stdin();
            let interactive = std::io::IsTerminal::is_terminal(&stdin);
            shell.repl(&mut stdin.lock(), &mut out, interactive)
        }
        command => shell.run(command, &mut out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_DOMAIN
        }
    }
}
