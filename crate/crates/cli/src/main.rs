//! `osd`: keys, issuance, presentation, serving and requesting disclosures,
//! and benchmarks.

mod input;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand, ValueEnum};
use osd_core::credential::{issue, CredentialData, IssueOptions, VerifiableCredential};
use osd_core::disclosure::{DisclosureError, HolderSessions};
use osd_core::keys::{KeyDirectory, KeyError, PartyKey};
use osd_core::par::Execution;
use osd_core::presentation::{
    create_presentation, PresentationData, PresentationSecret, ValidationPolicy,
    VerifiablePresentation,
};
use osd_core::wire::{
    connect, run_verifier, serve_connection, DisclosureMode, Endpoint, Listener, ProtocolError,
};
use osd_harness::checks::{check_baseline_ratio, check_orderings, check_scaling};
use osd_harness::{bench_all, write_csv, BenchConfig};
use rand::rngs::OsRng;

const DIRECTORY_ENV: &str = "OSD_DIRECTORY";

#[derive(Parser)]
#[command(
    name = "osd",
    version,
    about = "Oblivious selective disclosure for verifiable credentials"
)]
struct Cli {
    /// Signed key directory.
    #[arg(long, global = true, env = DIRECTORY_ENV, default_value = "directory.txt")]
    directory: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a signing key and register it in the directory.
    Keygen {
        party_id: String,
        /// Where to write the private key.
        #[arg(long)]
        out: PathBuf,
        /// Directory root key; created with the directory if missing.
        #[arg(long)]
        root_key: Option<PathBuf>,
    },
    /// Issue a credential from a `name=value` claims file.
    Issue {
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        subject: String,
        #[arg(long)]
        claims: PathBuf,
        /// Output prefix: writes `<out>.vc` and `<out>.dvc`.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "VerifiableCredential")]
        credential_type: String,
        /// Validity in seconds from now.
        #[arg(long, default_value_t = 365 * 86_400)]
        valid_for: u64,
    },
    /// Build a presentation for one audience.
    Present {
        #[arg(long)]
        key: PathBuf,
        /// Credential prefix as written by `issue`; repeatable.
        #[arg(long = "credential", required = true)]
        credentials: Vec<PathBuf>,
        #[arg(long)]
        audience: String,
        /// Output prefix: writes `<out>.vp`, `<out>.dvp` and `<out>.secret`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Offer a presentation and answer OPRF requests up to a quota.
    Serve {
        #[arg(long)]
        key: PathBuf,
        /// Presentation prefix as written by `present`.
        #[arg(long)]
        presentation: PathBuf,
        #[arg(long)]
        quota: u32,
        /// `tcp:<host>:<port>` or `loop:<name>`.
        #[arg(long)]
        endpoint: String,
        /// Stop after this many connections; by default stop once the
        /// quota is used up.
        #[arg(long)]
        connections: Option<usize>,
    },
    /// Request claims from a serving holder and print them.
    Disclose {
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        endpoint: String,
        #[arg(long, value_enum, default_value_t = Mode::Batch)]
        mode: Mode,
        /// `claim` or `index:claim`; repeatable (batch mode).
        #[arg(long = "pick")]
        picks: Vec<String>,
        /// Rule file (adaptive mode).
        #[arg(long)]
        rules: Option<PathBuf>,
    },
    /// Run the benchmark suite and check the expected cost shapes.
    Bench {
        /// JSON config; fields left out take the full-scale defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Claim counts up to 1024 and 1000 repetitions.
        #[arg(long)]
        full_scale: bool,
        #[arg(long, default_value = "bench.csv")]
        out: PathBuf,
    },
    /// Print a credential or presentation file as JSON.
    Inspect { file: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Batch,
    Adaptive,
}

enum Failure {
    Validation(String),
    Protocol(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 2,
            Failure::Protocol(_) => 3,
            Failure::Io(_) => 4,
        }
    }

    fn line(&self) -> String {
        match self {
            Failure::Validation(m) => format!("validation failure: {m}"),
            Failure::Protocol(m) => format!("protocol failure: {m}"),
            Failure::Io(m) => format!("i/o failure: {m}"),
        }
    }
}

type Result<T> = std::result::Result<T, Failure>;

fn io_fail(path: &Path) -> impl FnOnce(io::Error) -> Failure + '_ {
    move |e| Failure::Io(format!("{}: {e}", path.display()))
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(io_fail(path))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(io_fail(path))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(io_fail(path))
}

/// Creates `path` readable by the owner only.
fn write_private(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut opts = fs::OpenOptions::new();
    opts.write(true).create(true).truncate(true);
    #[cfg(unix)]
    std::os::unix::fs::OpenOptionsExt::mode(&mut opts, 0o600);
    let mut f = opts.open(path).map_err(io_fail(path))?;
    f.write_all(bytes).map_err(io_fail(path))
}

fn with_ext(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn key_error(e: KeyError) -> Failure {
    Failure::Validation(e.to_string())
}

fn load_key(path: &Path) -> Result<PartyKey> {
    PartyKey::from_file_string(&read_text(path)?).map_err(key_error)
}

fn load_directory(path: &Path) -> Result<KeyDirectory> {
    KeyDirectory::from_file_string(&read_text(path)?).map_err(key_error)
}

fn decode<T>(
    path: &Path,
    parsed: std::result::Result<T, osd_core::encoding::DecodeError>,
) -> Result<T> {
    parsed.map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))
}

fn keygen(dir_path: &Path, party_id: &str, out: &Path, root_key: Option<PathBuf>) -> Result<()> {
    let root_path = root_key.unwrap_or_else(|| with_ext(dir_path, "root"));
    let (root, mut dir) = if dir_path.exists() {
        (load_key(&root_path)?, load_directory(dir_path)?)
    } else {
        let root = PartyKey::generate("root", &mut OsRng).map_err(key_error)?;
        write_private(&root_path, root.to_file_string().as_bytes())?;
        let dir = KeyDirectory::new(&root);
        (root, dir)
    };
    if dir.root() != &root.verifying_key() {
        return Err(Failure::Validation(
            "root key does not match the directory".into(),
        ));
    }
    let key = PartyKey::generate(party_id, &mut OsRng).map_err(key_error)?;
    dir.register(&root, key.id(), key.verifying_key())
        .map_err(key_error)?;
    write_private(out, key.to_file_string().as_bytes())?;
    write(dir_path, dir.to_file_string().as_bytes())?;
    println!("registered {party_id}");
    Ok(())
}

fn cmd_issue(
    key: &Path,
    subject: &str,
    claims: &Path,
    out: &Path,
    credential_type: String,
    valid_for: u64,
) -> Result<()> {
    let issuer = load_key(key)?;
    let claims = input::parse_claims(&read(claims)?).map_err(Failure::Validation)?;
    let issued_at = now();
    let opts = IssueOptions {
        credential_type,
        issued_at,
        expires_at: issued_at.saturating_add(valid_for),
        ..IssueOptions::default()
    };
    let (vc, data) = issue(&issuer, subject, &claims, &opts, &mut OsRng)
        .map_err(|e| Failure::Validation(e.to_string()))?;
    write(&with_ext(out, "vc"), &vc.to_bytes())?;
    write_private(&with_ext(out, "dvc"), &data.to_bytes())?;
    println!("issued {} claims to {subject}", claims.len());
    Ok(())
}

fn cmd_present(key: &Path, credentials: &[PathBuf], audience: &str, out: &Path) -> Result<()> {
    let holder = load_key(key)?;
    let mut inputs = Vec::new();
    for prefix in credentials {
        let vc_path = with_ext(prefix, "vc");
        let data_path = with_ext(prefix, "dvc");
        let vc = decode(&vc_path, VerifiableCredential::from_bytes(&read(&vc_path)?))?;
        let data = decode(&data_path, CredentialData::from_bytes(&read(&data_path)?))?;
        inputs.push((vc, data));
    }
    let (vp, d_vp, secret) = create_presentation(
        &holder,
        &inputs,
        audience,
        now(),
        &mut OsRng,
        Execution::default(),
    )
    .map_err(|e| Failure::Validation(e.to_string()))?;
    let secret_bytes = secret
        .to_file_bytes()
        .map_err(|e| Failure::Validation(e.to_string()))?;
    write_private(&with_ext(out, "secret"), &secret_bytes)?;
    write(&with_ext(out, "vp"), &vp.to_bytes())?;
    write(&with_ext(out, "dvp"), &d_vp.to_bytes())?;
    println!("presented {} claims for {audience}", vp.claim_count());
    Ok(())
}

fn cmd_serve(
    dir_path: &Path,
    key: &Path,
    prefix: &Path,
    quota: u32,
    endpoint: &str,
    connections: Option<usize>,
) -> Result<()> {
    let holder = load_key(key)?;
    let dir = load_directory(dir_path)?;
    let vp_bytes = read(&with_ext(prefix, "vp"))?;
    let d_vp_bytes = read(&with_ext(prefix, "dvp"))?;
    let secret_path = with_ext(prefix, "secret");
    let mut secret = decode(
        &secret_path,
        PresentationSecret::from_file_bytes(&read(&secret_path)?),
    )?;
    let sessions =
        HolderSessions::new(&mut secret, quota).map_err(|e| Failure::Validation(e.to_string()))?;

    let endpoint = Endpoint::parse(endpoint).map_err(|e| Failure::Validation(e.to_string()))?;
    let listener = Listener::bind(&endpoint).map_err(|e| Failure::Io(e.to_string()))?;
    let bound = match listener.local_endpoint() {
        Endpoint::Tcp(addr) => format!("tcp:{addr}"),
        Endpoint::Loop(name) => format!("loop:{name}"),
    };
    println!("listening {bound}");
    io::stdout().flush().ok();

    let errors = Arc::new(Mutex::new(Vec::new()));
    let mut workers = Vec::new();
    let mut served = 0;
    while connections.is_none_or(|limit| served < limit) {
        if connections.is_none() && sessions.used() >= sessions.quota() {
            break;
        }
        let mut chan = listener.accept().map_err(|e| Failure::Io(e.to_string()))?;
        served += 1;
        let (holder, dir, sessions, errors) = (
            holder.clone(),
            dir.clone(),
            sessions.clone(),
            Arc::clone(&errors),
        );
        let (vp_bytes, d_vp_bytes) = (vp_bytes.clone(), d_vp_bytes.clone());
        let worker = thread::spawn(move || {
            match serve_connection(
                &mut chan,
                &holder,
                &dir,
                &sessions,
                &vp_bytes,
                &d_vp_bytes,
                &mut OsRng,
            ) {
                Ok(r) => println!("served {}: {} evaluations", r.peer_id, r.granted),
                Err(e) => errors.lock().expect("error list").push(e.to_string()),
            }
        });
        // Without a connection limit the quota check above needs this
        // session finished.
        if connections.is_none() {
            worker.join().ok();
        } else {
            workers.push(worker);
        }
    }
    for w in workers {
        w.join().ok();
    }
    sessions.close();
    fs::remove_file(&secret_path).map_err(io_fail(&secret_path))?;
    let errors = errors.lock().expect("error list");
    match errors.first() {
        Some(e) => Err(Failure::Protocol(e.clone())),
        None => Ok(()),
    }
}

fn protocol_failure(e: ProtocolError) -> Failure {
    match e {
        ProtocolError::Rejected(_)
        | ProtocolError::Disclosure(
            DisclosureError::QuotaExceeded | DisclosureError::InvalidSelection,
        ) => Failure::Validation(e.to_string()),
        other => Failure::Protocol(other.to_string()),
    }
}

fn cmd_disclose(
    dir_path: &Path,
    key: &Path,
    endpoint: &str,
    mode: Mode,
    picks: &[String],
    rules: Option<PathBuf>,
) -> Result<()> {
    let verifier = load_key(key)?;
    let dir = load_directory(dir_path)?;
    let mode = match (mode, rules) {
        (Mode::Batch, None) => {
            if picks.is_empty() {
                return Err(Failure::Validation(
                    "batch mode needs at least one --pick".into(),
                ));
            }
            let picks = picks
                .iter()
                .map(|p| input::parse_pick(p))
                .collect::<std::result::Result<_, _>>();
            DisclosureMode::Batch(picks.map_err(Failure::Validation)?)
        }
        (Mode::Adaptive, Some(path)) => {
            let rules = input::parse_rules(&read_text(&path)?).map_err(Failure::Validation)?;
            DisclosureMode::Adaptive(Box::new(move |so_far| rules.next(so_far)))
        }
        (Mode::Batch, Some(_)) => {
            return Err(Failure::Validation("--rules needs --mode adaptive".into()))
        }
        (Mode::Adaptive, None) => {
            return Err(Failure::Validation("adaptive mode needs --rules".into()))
        }
    };
    let endpoint = Endpoint::parse(endpoint).map_err(|e| Failure::Validation(e.to_string()))?;
    let chan = connect(&endpoint).map_err(|e| Failure::Io(e.to_string()))?;
    let policy = ValidationPolicy::new(verifier.id(), now());
    let claims =
        run_verifier(chan, &verifier, &dir, &policy, mode, &mut OsRng).map_err(protocol_failure)?;
    let mut out = io::stdout().lock();
    for c in claims {
        let line = if c.credential == 0 {
            format!("{}=", c.claim)
        } else {
            format!("{}:{}=", c.credential, c.claim)
        };
        out.write_all(line.as_bytes())
            .and_then(|_| out.write_all(&c.value))
            .and_then(|_| out.write_all(b"\n"))
            .map_err(|e| Failure::Io(e.to_string()))?;
    }
    Ok(())
}

fn cmd_bench(config: Option<PathBuf>, full_scale: bool, out: &Path) -> Result<()> {
    let config = match config {
        Some(path) => {
            let text = read_text(&path)?;
            serde_json::from_str::<BenchConfig>(&text)
                .map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))?
        }
        None if full_scale => BenchConfig::full(),
        None => BenchConfig::desk(),
    };
    config
        .validate()
        .map_err(|e| Failure::Validation(e.to_string()))?;
    let records = bench_all(&config);
    let file = fs::File::create(out).map_err(io_fail(out))?;
    write_csv(&records, file).map_err(|e| Failure::Io(e.to_string()))?;
    println!("wrote {} records to {}", records.len(), out.display());

    let mut checks = check_orderings(&records, 8);
    checks.push(check_baseline_ratio(&records, 8, 10.0));
    if config.claim_counts.len() >= 3 {
        checks.extend(check_scaling(&records));
    }
    for c in &checks {
        println!("{c}");
    }
    let failed = checks.iter().filter(|c| !c.pass).count();
    if failed > 0 {
        return Err(Failure::Validation(format!(
            "{failed} benchmark checks failed"
        )));
    }
    Ok(())
}

fn cmd_inspect(path: &Path) -> Result<()> {
    let bytes = read(path)?;
    let json = match path.extension().and_then(|e| e.to_str()) {
        Some("vc") => decode(path, VerifiableCredential::from_bytes(&bytes))?.to_json(),
        Some("dvc") => decode(path, CredentialData::from_bytes(&bytes))?.to_json(),
        Some("vp") => decode(path, VerifiablePresentation::from_bytes(&bytes))?.to_json(),
        Some("dvp") => decode(path, PresentationData::from_bytes(&bytes))?.to_json(),
        _ => {
            return Err(Failure::Validation(
                "expected a .vc, .dvc, .vp or .dvp file".into(),
            ))
        }
    };
    println!("{json}");
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let dir = cli.directory;
    match cli.command {
        Command::Keygen {
            party_id,
            out,
            root_key,
        } => keygen(&dir, &party_id, &out, root_key),
        Command::Issue {
            key,
            subject,
            claims,
            out,
            credential_type,
            valid_for,
        } => cmd_issue(&key, &subject, &claims, &out, credential_type, valid_for),
        Command::Present {
            key,
            credentials,
            audience,
            out,
        } => cmd_present(&key, &credentials, &audience, &out),
        Command::Serve {
            key,
            presentation,
            quota,
            endpoint,
            connections,
        } => cmd_serve(&dir, &key, &presentation, quota, &endpoint, connections),
        Command::Disclose {
            key,
            endpoint,
            mode,
            picks,
            rules,
        } => cmd_disclose(&dir, &key, &endpoint, mode, &picks, rules),
        Command::Bench {
            config,
            full_scale,
            out,
        } => cmd_bench(config, full_scale, &out),
        Command::Inspect { file } => cmd_inspect(&file),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.line());
            ExitCode::from(f.code())
        }
    }
}
